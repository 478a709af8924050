"""Extended Stevens operators O_l^m for crystal-field Hamiltonians.

Conventions (documented here because software normalizations differ):

* Only even ranks l in {2, 4, 6} are supported, which keeps Kramers
  degeneracy intact for half-integer J.
* The operators follow the extended Stevens convention. With X = J(J+1)
  and f_lm(Jz) the operator-equivalent diagonal polynomial,

      O_l^0  = f_l0(Jz)
      O_l^m  = (1/4) { f_lm(Jz), J+^m + J-^m }          (m > 0)
      O_l^-m = (-i/4){ f_lm(Jz), J+^m - J-^m }          (m > 0)

  where {A, B} = AB + BA. Every O_l^m is Hermitian and, for m != 0,
  traceless with real (m > 0) or imaginary (m < 0) ladder structure.
* The f_lm table matches Abragam & Bleaney / Rudowicz, e.g.
  O_2^0 = 3Jz^2 - X and O_2^2 = (J+^2 + J-^2)/2.

The tesseral partner pairs (m, -m) transform into each other under
rotations about z, which is exercised by the rotational-invariance tests.
"""

import numpy as np
from numpy.linalg import matrix_power
from numpy.typing import NDArray

from .angular import AngularMomentum

SUPPORTED_RANKS = (2, 4, 6)

# Operator-equivalent polynomials f_lm(z; X), keyed by (l, |m|).
# z stands for the Jz eigenvalue and X for J(J+1).
_F_TABLE = {
    (2, 0): lambda z, x: 3 * z**2 - x,
    (2, 1): lambda z, x: z,
    (2, 2): lambda z, x: np.ones_like(z),
    (4, 0): lambda z, x: 35 * z**4 - (30 * x - 25) * z**2 + 3 * x**2 - 6 * x,
    (4, 1): lambda z, x: 7 * z**3 - (3 * x + 1) * z,
    (4, 2): lambda z, x: 7 * z**2 - x - 5,
    (4, 3): lambda z, x: z,
    (4, 4): lambda z, x: np.ones_like(z),
    (6, 0): lambda z, x: (
        231 * z**6
        - (315 * x - 735) * z**4
        + (105 * x**2 - 525 * x + 294) * z**2
        - 5 * x**3
        + 40 * x**2
        - 60 * x
    ),
    (6, 1): lambda z, x: 33 * z**5 - (30 * x - 15) * z**3 + (5 * x**2 - 10 * x + 12) * z,
    (6, 2): lambda z, x: 33 * z**4 - (18 * x + 123) * z**2 + x**2 + 10 * x + 102,
    (6, 3): lambda z, x: 11 * z**3 - (3 * x + 59) * z,
    (6, 4): lambda z, x: 11 * z**2 - x - 38,
    (6, 5): lambda z, x: z,
    (6, 6): lambda z, x: np.ones_like(z),
}


class InvalidTermError(ValueError):
    """Raised for |m| > l."""


class UnsupportedRankError(ValueError):
    """Raised for ranks outside {2, 4, 6}."""


def build_stevens_operator(l: int, m: int, j: AngularMomentum) -> NDArray[np.complex128]:
    """Dense matrix of the extended Stevens operator O_l^m.

    Parameters
    ----------
    l : int
        Rank, one of 2, 4, 6.
    m : int
        Projection, -l <= m <= l. Negative m gives the sin-type tesseral
        partner of +m.
    j : AngularMomentum
        Operator algebra to build on.

    Returns
    -------
    (d, d) complex Hermitian ndarray, dimensionless.
    """
    if l not in SUPPORTED_RANKS:
        raise UnsupportedRankError(f"rank l={l} not supported; choose from {SUPPORTED_RANKS}")
    if abs(m) > l:
        raise InvalidTermError(f"|m|={abs(m)} exceeds rank l={l}")

    x = j.j * (j.j + 1.0)
    f_diag = np.asarray(_F_TABLE[(l, abs(m))](j.m_values, x), dtype=float)
    f = np.diag(f_diag).astype(complex)
    if m == 0:
        return f

    ladder = matrix_power(j.jp, abs(m))
    if m > 0:
        combo = ladder + ladder.conj().T
        op = 0.25 * (f @ combo + combo @ f)
    else:
        combo = ladder - ladder.conj().T
        op = -0.25j * (f @ combo + combo @ f)
    return op
