"""Regenerate the golden reference outputs bundled with the test suite.

The four-level deck is swept end to end and every temperature is
cross-checked against the brute-force golden-rule oracle before anything
is written: a golden file only freezes numbers the slow reference path
reproduces to 1e-10.  Outputs land in tests/golden/.

Run from anywhere:  python scripts/make_golden.py
"""

from __future__ import annotations

import json
import pathlib
import shutil
import sys
import tempfile

import numpy as np

ROOT = pathlib.Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

import oracles

from spinphonon.bath import BathConfig
from spinphonon.config import load_config
from spinphonon.dynamics import pair_sums_to_times
from spinphonon.generators import build_generator
from spinphonon.runner import PointEngine, run_sweep

DECK = ROOT / "decks" / "four_level.yaml"
GOLDEN = ROOT / "tests" / "golden"
ORACLE_TOL = 1e-10
DOMINANCE_TEMPS = (1.0, 1.41)


def verify_against_oracle(cfg) -> None:
    eng = PointEngine(cfg)
    vmats = [c.matrix for c in eng.couplings]
    energies = eng.es.energies_cm1
    for t in cfg.temperatures_k:
        bath = BathConfig(modes=cfg.modes, temperature_k=t, broadening=cfg.broadening)
        kw = dict(
            secular_tol_cm1=cfg.secular_tol_cm1,
            regularizer_cm1=cfg.regularizer_cm1,
        )
        res2 = build_generator(2, eng.couplings, bath, eng.es, **kw)
        ref2 = oracles.rates_to_population_block(
            oracles.population_rates_2(vmats, energies, bath)
        )
        res4 = build_generator(
            4,
            eng.couplings,
            bath,
            eng.es,
            channels=cfg.channels,
            allow_same_mode=cfg.allow_same_mode,
            **kw,
        )
        ref4 = oracles.rates_to_population_block(
            oracles.population_rates_4(
                vmats,
                energies,
                bath,
                channels=cfg.channels,
                allow_same_mode=cfg.allow_same_mode,
                eta_cm1=cfg.regularizer_cm1,
            )
        )
        for label, got, ref in (
            ("order 2", res2.superoperator.population_block(), ref2),
            ("order 4", res4.superoperator.population_block(), ref4),
        ):
            err = np.abs(got - ref).max() / np.abs(ref).max()
            if err > ORACLE_TOL:
                raise SystemExit(
                    f"oracle mismatch at T={t} K ({label}): rel err {err:.3e}"
                )
            print(f"  T={t:>5} K {label}: oracle rel err {err:.3e}")


def dominance_factors(cfg) -> dict:
    """Cumulative fourth-order (1/T2*) / (1/(2 T1)) at the coldest points."""
    eng = PointEngine(cfg)
    out = {"deck": DECK.name, "temperatures_K": [], "dephasing_over_t1": []}
    for t in DOMINANCE_TEMPS:
        reports = eng.rates(t, orders=(2, 4), workers=1)
        rep = reports[4]
        factor = (2.0 * rep.t1_s) / rep.t2star_s
        out["temperatures_K"].append(t)
        out["dephasing_over_t1"].append(factor)
        print(f"  T={t} K: (1/T2*) / (1/(2 T1)) = {factor:.6f}")
    return out


def main() -> None:
    cfg = load_config(DECK)
    GOLDEN.mkdir(parents=True, exist_ok=True)

    print("verifying sweep against the brute-force oracle")
    verify_against_oracle(cfg)

    print("sweeping deck")
    with tempfile.TemporaryDirectory() as tmp:
        result = run_sweep(cfg, output_dir=tmp)
        shutil.copy(result.rates_csv_path, GOLDEN / "four_level_rates.csv")
    print(f"wrote {GOLDEN / 'four_level_rates.csv'}")

    print("recording low-temperature dephasing dominance")
    data = dominance_factors(cfg)
    path = GOLDEN / "dominance.json"
    path.write_text(json.dumps(data, indent=2) + "\n")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
