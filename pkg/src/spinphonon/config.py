"""Input decks: YAML loading, schema validation, resolution to run objects.

A deck is a single YAML document validated against the bundled JSON
schema (schema/deck.schema.json). Validation collects every violation
instead of stopping at the first; unknown keys are rejected so a typo in
a unit suffix (width vs width_cm1) surfaces as a diagnostic rather than
a silently ignored setting.
"""

import hashlib
import json
import logging
from dataclasses import dataclass
from importlib import resources

import numpy as np
import yaml
from jsonschema import Draft202012Validator
from numpy.typing import NDArray

from .angular import AngularMomentum
from .bath import BroadeningPolicy, PhononMode
from .spin_model import SpinModel, StevensTerm

log = logging.getLogger(__name__)

DEFAULT_ORDERS = "both"
DEFAULT_RATES_CSV = "rates.csv"
DEFAULT_FIT_REPORT = "fit_report.txt"


class DeckValidationError(ValueError):
    """Raised when a deck fails validation; carries every diagnostic."""

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("invalid deck:\n" + "\n".join(f"  - {d}" for d in diagnostics))


@dataclass(frozen=True)
class CouplingSpec:
    """Per-mode coupling input, kept in deck form so frames can be re-derived."""

    mode_index: int
    terms: tuple[StevensTerm, ...] | None = None
    matrix: NDArray[np.complex128] | None = None
    matrix_basis: str = "mj"


@dataclass(frozen=True)
class FitRequest:
    quantity: str
    fit_model: str
    order: int
    window_k: tuple[float, float] | None


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved deck: defaults applied, objects constructed."""

    model: SpinModel
    modes: tuple[PhononMode, ...]
    coupling_specs: tuple[CouplingSpec, ...]
    temperatures_k: tuple[float, ...]
    fields_t: tuple[tuple[float, float, float], ...] | None
    orders: tuple[int, ...]
    rates_csv: str
    fit_report: str
    secular_tol_cm1: float
    regularizer_cm1: float
    broadening: BroadeningPolicy
    channels: tuple[str, ...]
    allow_same_mode: bool
    workers: int
    drop_threshold_per_s: float
    align_easy_axis: bool
    fits: tuple[FitRequest, ...]
    resolved: dict

    @property
    def config_hash(self) -> str:
        blob = json.dumps(self.resolved, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _schema() -> dict:
    text = resources.files("spinphonon").joinpath("schema/deck.schema.json").read_text()
    return json.loads(text)


def _json_path(error) -> str:
    path = ".".join(
        f"[{p}]" if isinstance(p, int) else p for p in error.absolute_path
    ).replace(".[", "[")
    return path or "(deck root)"


def _semantic_diagnostics(raw: dict) -> list[str]:
    """Cross-field checks the schema grammar cannot express."""
    out: list[str] = []
    model = raw.get("model", {})
    two_j = model.get("two_j")
    dim = two_j + 1 if isinstance(two_j, int) else None

    for i, t in enumerate(model.get("stevens_terms_cm1") or []):
        if isinstance(t, list) and len(t) == 3 and isinstance(t[1], int):
            l, m = t[0], t[1]
            if l in (2, 4, 6) and abs(m) > l:
                out.append(f"model.stevens_terms_cm1[{i}]: |m| = {abs(m)} exceeds l = {l}")

    modes = raw.get("bath", {}).get("modes_cm1") or []
    ops = raw.get("coupling", {}).get("operators") or []
    if modes and ops and len(modes) != len(ops):
        out.append(
            f"coupling.operators: {len(ops)} operators for {len(modes)} modes; "
            "give exactly one operator per mode, in mode order"
        )
    for i, op in enumerate(ops):
        if not isinstance(op, dict):
            continue
        has_terms = "stevens_derivatives_cm1" in op
        has_matrix = "matrix_cm1" in op
        if has_terms and has_matrix:
            out.append(
                f"coupling.operators[{i}]: both stevens_derivatives_cm1 and matrix_cm1 "
                "given; a mode takes one coupling form only"
            )
        elif not has_terms and not has_matrix:
            out.append(
                f"coupling.operators[{i}]: needs stevens_derivatives_cm1 or matrix_cm1"
            )
        for j, t in enumerate(op.get("stevens_derivatives_cm1") or []):
            if isinstance(t, list) and len(t) == 3 and isinstance(t[1], int):
                l, m = t[0], t[1]
                if l in (2, 4, 6) and abs(m) > l:
                    out.append(
                        f"coupling.operators[{i}].stevens_derivatives_cm1[{j}]: "
                        f"|m| = {abs(m)} exceeds l = {l}"
                    )
        mat = op.get("matrix_cm1")
        if isinstance(mat, dict) and dim is not None:
            for key in ("real", "imag"):
                rows = mat.get(key)
                if rows is None:
                    continue
                shape_ok = len(rows) == dim and all(
                    isinstance(r, list) and len(r) == dim for r in rows
                )
                if not shape_ok:
                    out.append(
                        f"coupling.operators[{i}].matrix_cm1.{key}: must be "
                        f"{dim}x{dim} for two_j = {two_j}"
                    )

    for i, fit in enumerate(raw.get("fits") or []):
        win = fit.get("window_k") if isinstance(fit, dict) else None
        if isinstance(win, list) and len(win) == 2 and win[0] >= win[1]:
            out.append(f"fits[{i}].window_k: lower bound must be below upper bound")
    return out


def validate_deck(raw: dict) -> list[str]:
    """Every problem with the deck, or an empty list. Never fail-fast."""
    validator = Draft202012Validator(_schema())
    diags = [
        f"{_json_path(e)}: {e.message}"
        for e in sorted(validator.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path)))
    ]
    # semantic checks assume schema-conformant shapes; report them together
    # anyway since they index into whatever structure is present
    diags.extend(_semantic_diagnostics(raw))
    return diags


def _resolved_echo(raw: dict) -> dict:
    """The deck with every default filled in, for provenance and echo."""
    model = dict(raw["model"])
    model.setdefault("g_j", 2.0)
    model.setdefault("stevens_terms_cm1", [])
    model.setdefault("field_t", [0.0, 0.0, 0.0])

    sweep = dict(raw["sweep"])
    sweep.setdefault("orders", DEFAULT_ORDERS)

    outputs = dict(raw.get("outputs") or {})
    outputs.setdefault("rates_csv", DEFAULT_RATES_CSV)
    outputs.setdefault("fit_report", DEFAULT_FIT_REPORT)

    numeric = dict(raw.get("numeric") or {})
    numeric.setdefault("secular_tol_cm1", 1e-6)
    numeric.setdefault("regularizer_cm1", 1.0)
    broadening = dict(numeric.get("broadening") or {})
    broadening.setdefault("kind", "gaussian")
    if broadening["kind"] != "exact":
        broadening.setdefault("width_cm1", 3.0)
        broadening.setdefault("cutoff_sigmas", 5.0)
    numeric["broadening"] = broadening
    numeric.setdefault("channels", ["absorption_emission"])
    numeric.setdefault("allow_same_mode", False)
    numeric.setdefault("workers", 1)
    numeric.setdefault("drop_threshold_per_s", 0.0)
    numeric.setdefault("align_easy_axis", True)

    fits = []
    for fit in raw.get("fits") or []:
        fit = dict(fit)
        fit.setdefault("order", max(_orders_tuple(sweep["orders"])))
        fit.setdefault("window_k", None)
        fits.append(fit)

    return {
        "model": model,
        "bath": dict(raw["bath"]),
        "coupling": raw["coupling"],
        "sweep": sweep,
        "outputs": outputs,
        "numeric": numeric,
        "fits": fits,
    }


def _orders_tuple(orders) -> tuple[int, ...]:
    return {"both": (2, 4), 2: (2,), 4: (4,)}[orders]


def _coupling_spec(i: int, op: dict) -> CouplingSpec:
    if "stevens_derivatives_cm1" in op:
        terms = tuple(
            StevensTerm(l=int(l), m=int(m), coefficient_cm1=float(v))
            for l, m, v in op["stevens_derivatives_cm1"]
        )
        return CouplingSpec(mode_index=i, terms=terms)
    mat = op["matrix_cm1"]
    real = np.array(mat["real"], dtype=float)
    imag = np.array(mat.get("imag", np.zeros_like(real)), dtype=float)
    return CouplingSpec(
        mode_index=i,
        matrix=real + 1j * imag,
        matrix_basis=mat.get("basis", "mj"),
    )


def resolve(raw: dict) -> RunConfig:
    """Validate a deck dict and build the runtime config from it."""
    diags = validate_deck(raw)
    if diags:
        raise DeckValidationError(diags)
    echo = _resolved_echo(raw)
    m = echo["model"]
    model = SpinModel(
        angular_momentum=AngularMomentum(two_j=m["two_j"]),
        stevens_terms=tuple(
            StevensTerm(l=int(l), m=int(mm), coefficient_cm1=float(v))
            for l, mm, v in m["stevens_terms_cm1"]
        ),
        g_j=float(m["g_j"]),
        field_t=tuple(float(x) for x in m["field_t"]),
    )
    modes = tuple(
        PhononMode(index=i, omega_cm1=float(w)) for i, w in enumerate(echo["bath"]["modes_cm1"])
    )
    specs = tuple(
        _coupling_spec(i, op) for i, op in enumerate(echo["coupling"]["operators"])
    )

    b = echo["numeric"]["broadening"]
    if b["kind"] == "exact":
        broadening = BroadeningPolicy.exact(b.get("width_cm1", 1e-9))
    else:
        broadening = BroadeningPolicy(
            kind=b["kind"], width_cm1=b["width_cm1"], cutoff_sigmas=b["cutoff_sigmas"]
        )

    sweep = echo["sweep"]
    fields = sweep.get("fields_t")
    num = echo["numeric"]
    return RunConfig(
        model=model,
        modes=modes,
        coupling_specs=specs,
        temperatures_k=tuple(float(t) for t in sweep["temperatures_k"]),
        fields_t=tuple(tuple(float(x) for x in f) for f in fields) if fields else None,
        orders=_orders_tuple(sweep["orders"]),
        rates_csv=echo["outputs"]["rates_csv"],
        fit_report=echo["outputs"]["fit_report"],
        secular_tol_cm1=float(num["secular_tol_cm1"]),
        regularizer_cm1=float(num["regularizer_cm1"]),
        broadening=broadening,
        channels=tuple(num["channels"]),
        allow_same_mode=bool(num["allow_same_mode"]),
        workers=int(num["workers"]),
        drop_threshold_per_s=float(num["drop_threshold_per_s"]),
        align_easy_axis=bool(num["align_easy_axis"]),
        fits=tuple(
            FitRequest(
                quantity=f["quantity"],
                fit_model=f["fit_model"],
                order=int(f["order"]),
                window_k=tuple(f["window_k"]) if f["window_k"] else None,
            )
            for f in echo["fits"]
        ),
        resolved=echo,
    )


def load_config(path: str) -> RunConfig:
    """Read, validate and resolve a deck file. Raises with all diagnostics."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise DeckValidationError(["deck must be a mapping at the top level"])
    return resolve(raw)
