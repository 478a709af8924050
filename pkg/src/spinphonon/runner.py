"""Temperature/field sweeps over a resolved deck: rates CSV and fit report.

The sweep walks fields (outer), temperatures, then orders, so a 10
temperature deck with orders=both yields 20 CSV rows. The order-4 row is
cumulative: R = R2 + R4, and the jump-level T1/T2* sums are added the
same way before inversion.
"""

import logging
import math
import os
import time
from dataclasses import dataclass, replace

import numpy as np

from ._version import __version__ as _pkg_version
from .bath import BathConfig
from .config import FitRequest, RunConfig
from .constants import C_CM_S, KB_CM1_PER_K, MU_B_CM1_PER_T
from .coupling import CouplingOperator, from_raw_matrix, from_stevens_derivatives
from .dynamics import FitResult, RateReport, extract_tau, fit_regimes, pair_sums_to_times, pair_t2
from .generators import PairRateSums, Superoperator, build_generator, secular_partition
from .spin_model import (
    easy_axis_of,
    eigensystem_for,
    fundamental_pair,
    rotate_model,
    rotate_stevens_terms,
    rotation_taking_to_z,
    spin_rotation_matrix,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = ("temperature_K", "order", "tau_s", "t1_s", "t2_s", "t2star_s", "overlap_score")
FIELD_COLUMNS = ("field_T_x", "field_T_y", "field_T_z")

_RATE_OF = {
    "tau_rate": lambda rep: 1.0 / rep.tau_s,
    "t1_rate": lambda rep: 1.0 / rep.t1_s,
    "t2_rate": lambda rep: 1.0 / rep.t2_s,
    "t2star_rate": lambda rep: 1.0 / rep.t2star_s,
}


class SweepPointError(RuntimeError):
    """A sweep point failed; message carries the temperature/field."""


@dataclass(frozen=True)
class SweepRow:
    field_t: tuple[float, float, float]
    report: RateReport


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    fit_results: tuple[tuple[FitRequest, FitResult], ...]
    rates_csv_path: str
    fit_report_path: str


class PointEngine:
    """Eigensystem, couplings and secular blocks prepared for one field.

    Models are re-expressed in the easy-axis frame before any rates are
    computed (align_easy_axis), with the coupling operators carried
    through the same rotation: Stevens derivative sets are re-expanded in
    the rotated frame, raw M_J matrices are conjugated by the spin-space
    rotation, and eigenbasis matrices ride along with the basis itself.
    """

    def __init__(self, config: RunConfig, field_t=None):
        model = config.model
        if field_t is not None:
            model = replace(model, field_t=tuple(float(x) for x in field_t))
        j = model.angular_momentum
        if j.two_j % 2 == 0:
            raise SweepPointError(
                "rate sweeps need a Kramers system (half-integer J); "
                f"got two_j = {j.two_j}"
            )
        rot = np.eye(3)
        if config.align_easy_axis:
            es0 = eigensystem_for(model)
            axis, quality = easy_axis_of(es0, model)
            if quality != "none":
                r = rotation_taking_to_z(axis)
                if not np.allclose(r, np.eye(3), atol=1e-12):
                    model = rotate_model(model, r)
                    rot = r
                    log.info("aligned easy axis %s onto z (%s quality)", axis, quality)
        self.config = config
        self.model = model
        self.rotation = rot
        self.es = eigensystem_for(model)
        self.pair = fundamental_pair(self.es.kramers_pairs)
        self.blocks = secular_partition(self.es, config.secular_tol_cm1)
        d_rot = spin_rotation_matrix(rot, j)
        self.couplings = tuple(self._coupling(spec, rot, d_rot) for spec in config.coupling_specs)
        self.timers = {"prepare_s": 0.0, "generate_s": 0.0, "extract_s": 0.0}

    def _coupling(self, spec, rot, d_rot) -> CouplingOperator:
        j = self.model.angular_momentum
        rotated = not np.allclose(rot, np.eye(3), atol=1e-12)
        if spec.terms is not None:
            terms = rotate_stevens_terms(spec.terms, rot, j) if rotated else spec.terms
            return from_stevens_derivatives(terms, j, self.es, mode_index=spec.mode_index)
        if spec.matrix_basis == "mj" and rotated:
            matrix = d_rot @ spec.matrix @ d_rot.conj().T
        else:
            # eigenbasis input is already expressed relative to the
            # (rotated) eigenvectors, so it never needs conjugating
            matrix = spec.matrix
        return from_raw_matrix(
            matrix, spec.matrix_basis, self.es, mode_index=spec.mode_index
        )

    def rates(self, temperature_k: float, orders, workers: int) -> dict[int, RateReport]:
        cfg = self.config
        bath = BathConfig(
            modes=cfg.modes, temperature_k=temperature_k, broadening=cfg.broadening
        )
        common = dict(
            blocks=self.blocks,
            secular_tol_cm1=cfg.secular_tol_cm1,
            regularizer_cm1=cfg.regularizer_cm1,
            channels=cfg.channels,
            allow_same_mode=cfg.allow_same_mode,
            workers=workers,
            rate_pairs=[self.pair.indices],
            drop_threshold=cfg.drop_threshold_per_s,
        )
        t0 = time.perf_counter()
        res2 = build_generator(2, self.couplings, bath, self.es, **common)
        res4 = build_generator(4, self.couplings, bath, self.es, **common) if 4 in orders else None
        t1 = time.perf_counter()
        self.timers["generate_s"] += t1 - t0

        out: dict[int, RateReport] = {}
        key = self.pair.indices
        if 2 in orders:
            out[2] = self._report(res2.superoperator, res2.pair_sums[key], temperature_k, 2)
        if 4 in orders:
            sup2, sup4 = res2.superoperator, res4.superoperator
            cumulative = Superoperator(
                order=4, matrix=sup2.matrix + sup4.matrix, basis=sup4.basis, dim=sup4.dim
            )
            s2, s4 = res2.pair_sums[key], res4.pair_sums[key]
            sums = PairRateSums(
                half_t1_rate=s2.half_t1_rate + s4.half_t1_rate,
                dephasing_rate=s2.dephasing_rate + s4.dephasing_rate,
            )
            out[4] = self._report(cumulative, sums, temperature_k, 4)
        self.timers["extract_s"] += time.perf_counter() - t1
        return out

    def _report(self, sup, sums, temperature_k: float, order: int) -> RateReport:
        tau = extract_tau(sup, self.es, self.pair)
        t1_s, t2star_s = pair_sums_to_times(sums)
        t2 = pair_t2(sup, *self.pair.indices)
        return RateReport(
            temperature_k=temperature_k,
            order=order,
            tau_s=tau.tau_s,
            t1_s=t1_s,
            t2_s=t2.t2_s,
            t2star_s=t2star_s,
            overlap_score=tau.overlap_score,
        )


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return repr(float(x))


def _provenance(config: RunConfig) -> list[str]:
    return [
        f"# spinphonon {_pkg_version}",
        f"# config_hash: {config.config_hash}",
        (
            f"# constants: mu_B_cm1_per_T={MU_B_CM1_PER_T!r}"
            f" k_B_cm1_per_K={KB_CM1_PER_K!r} c_cm_s={C_CM_S!r}"
        ),
        f"# orders: {','.join(str(o) for o in config.orders)} (4 = cumulative 2+4)",
    ]


def _write_rates_csv(path: str, rows, config: RunConfig, with_fields: bool):
    cols = CSV_COLUMNS + (FIELD_COLUMNS if with_fields else ())
    lines = _provenance(config)
    lines.append(",".join(cols))
    for row in rows:
        rep = row.report
        vals = [
            _fmt(rep.temperature_k),
            str(rep.order),
            _fmt(rep.tau_s),
            _fmt(rep.t1_s),
            _fmt(rep.t2_s),
            _fmt(rep.t2star_s),
            _fmt(rep.overlap_score),
        ]
        if with_fields:
            vals.extend(_fmt(x) for x in row.field_t)
        lines.append(",".join(vals))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _run_fits(config: RunConfig, rows) -> list[tuple[FitRequest, FitResult]]:
    if not config.fits:
        return []
    base_field = rows[0].field_t if rows else None
    out = []
    for req in config.fits:
        pts = [
            (r.report.temperature_k, _RATE_OF[req.quantity](r.report))
            for r in rows
            if r.report.order == req.order and r.field_t == base_field
        ]
        if req.window_k is not None:
            lo, hi = req.window_k
            pts = [(t, v) for t, v in pts if lo <= t <= hi]
        out.append((req, fit_regimes(pts, req.fit_model)))
    return out


def _write_fit_report(path: str, fits, config: RunConfig, field_note: str):
    lines = _provenance(config)
    if field_note:
        lines.append(f"# {field_note}")
    if not fits:
        lines.append("no fits requested")
    for i, (req, res) in enumerate(fits, start=1):
        lines.append(f"[fit {i}] quantity={req.quantity} model={req.fit_model} order={req.order}")
        lines.append(f"  window_K = {_fmt(res.window_k[0])} .. {_fmt(res.window_k[1])}")
        if res.model == "arrhenius":
            lines.append(f"  U_cm1 = {_fmt(res.u_cm1)}")
            lines.append(f"  prefactor_per_s = {_fmt(res.prefactor_per_s)}")
        else:
            lines.append(f"  exponent = {_fmt(res.exponent)}")
            lines.append(f"  scale = {_fmt(res.scale)}")
        lines.append(f"  rms_log_residual = {_fmt(res.residual)}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def run_sweep(config: RunConfig, *, output_dir: str = ".", workers: int | None = None) -> SweepResult:
    """Execute the deck's sweep and write the rates CSV and fit report."""
    workers = config.workers if workers is None else workers
    fields = config.fields_t if config.fields_t is not None else (config.model.field_t,)
    sweeping_fields = config.fields_t is not None

    rows: list[SweepRow] = []
    timers = {"prepare_s": 0.0, "generate_s": 0.0, "extract_s": 0.0}
    for field in fields:
        t0 = time.perf_counter()
        try:
            engine = PointEngine(config, field)
        except SweepPointError:
            raise
        except Exception as exc:
            raise SweepPointError(f"preparing field_T={list(field)}: {exc}") from exc
        timers["prepare_s"] += time.perf_counter() - t0
        for temperature in config.temperatures_k:
            try:
                reports = engine.rates(temperature, config.orders, workers)
            except Exception as exc:
                raise SweepPointError(
                    f"at temperature_K={temperature}, field_T={list(field)}: {exc}"
                ) from exc
            rows.extend(SweepRow(field, reports[o]) for o in config.orders)
        timers["generate_s"] += engine.timers["generate_s"]
        timers["extract_s"] += engine.timers["extract_s"]

    fits = _run_fits(config, rows)

    os.makedirs(output_dir, exist_ok=True)
    csv_path = os.path.join(output_dir, config.rates_csv)
    report_path = os.path.join(output_dir, config.fit_report)
    _write_rates_csv(csv_path, rows, config, sweeping_fields)
    field_note = (
        f"fits use the first swept field value only: field_T={list(fields[0])}"
        if sweeping_fields and config.fits
        else ""
    )
    _write_fit_report(report_path, fits, config, field_note)

    log.info(
        "sweep finished: %d rows; prepare %.3f s, generate %.3f s, extract %.3f s",
        len(rows),
        timers["prepare_s"],
        timers["generate_s"],
        timers["extract_s"],
    )
    return SweepResult(
        rows=tuple(rows),
        fit_results=tuple(fits),
        rates_csv_path=csv_path,
        fit_report_path=report_path,
    )
