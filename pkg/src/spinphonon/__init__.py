"""Spin-phonon relaxation generators for crystal-field spin systems.

Second- and fourth-order secular Lindblad generators for a spin multiplet
linearly coupled to a harmonic phonon bath, with extraction of the
magnetization relaxation time tau and the pairwise T1 / T2* / T2 times.
"""

from ._version import __version__
from .angular import AngularMomentum
from .bath import BathConfig, BroadeningPolicy, PhononMode, delta, g2, g4, occupation
from .config import DeckValidationError, RunConfig, load_config, validate_deck
from .constants import CM1_TO_RAD_S, KB_CM1_PER_K, MU_B_CM1_PER_T
from .coupling import CouplingOperator, from_raw_matrix, from_stevens_derivatives
from .dynamics import (
    AmbiguousEigenvectorError,
    FitResult,
    PositivityError,
    RateReport,
    TauResult,
    extract_tau,
    fit_regimes,
    pair_t1,
    pair_t2,
    pair_t2star,
    propagate,
)
from .generators import (
    GeneratorResult,
    JumpOperator,
    SecularBlock,
    SingularityError,
    Superoperator,
    assemble_generator,
    build_generator,
    jump_operators_2,
    jump_operators_4,
    secular_partition,
    t_matrix,
)
from .runner import run_sweep
from .spin_model import (
    Eigensystem,
    KramersPair,
    SpinModel,
    StevensTerm,
    diagonalize,
    eigensystem_for,
    fundamental_pair,
    identify_kramers_pairs,
    rotate_model,
    rotate_to_easy_axis,
)
from .stevens import build_stevens_operator

__all__ = [
    "AngularMomentum",
    "AmbiguousEigenvectorError",
    "BathConfig",
    "BroadeningPolicy",
    "CM1_TO_RAD_S",
    "CouplingOperator",
    "DeckValidationError",
    "Eigensystem",
    "FitResult",
    "GeneratorResult",
    "JumpOperator",
    "KB_CM1_PER_K",
    "KramersPair",
    "MU_B_CM1_PER_T",
    "PhononMode",
    "PositivityError",
    "RateReport",
    "RunConfig",
    "SecularBlock",
    "SingularityError",
    "SpinModel",
    "StevensTerm",
    "Superoperator",
    "TauResult",
    "assemble_generator",
    "build_generator",
    "build_stevens_operator",
    "delta",
    "diagonalize",
    "eigensystem_for",
    "extract_tau",
    "fit_regimes",
    "from_raw_matrix",
    "from_stevens_derivatives",
    "fundamental_pair",
    "g2",
    "g4",
    "identify_kramers_pairs",
    "jump_operators_2",
    "jump_operators_4",
    "load_config",
    "occupation",
    "pair_t1",
    "pair_t2",
    "pair_t2star",
    "propagate",
    "rotate_model",
    "rotate_to_easy_axis",
    "run_sweep",
    "secular_partition",
    "t_matrix",
    "validate_deck",
]
