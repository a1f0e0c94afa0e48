"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary
(see ``conftest.pytest_terminal_summary``). Run on its own with
``pytest tests/test_acceptance.py`` or ``python tests/test_acceptance.py``.
"""

import dataclasses
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from taskbeam.cli import af_designs, resolve_config, validate_rows
from taskbeam.design import digital_filter, ex_mse
from taskbeam.evaluation import (
    TABLE1_CONVENTIONAL_HYBRID,
    TABLE1_FULLY_DIGITAL,
    TABLE1_TASK_SPECIFIC,
    af_sweep,
    power_fully_digital,
    power_hybrid,
)
from taskbeam.experiments import load_config, run_sweep
from taskbeam.quantization import AdcModel
from taskbeam.robust import mse_full
from taskbeam.scenario import build_covariances, mmse_floor, reference_scenario

RESULTS = {}
TESTS = Path(__file__).parent


def record(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[number] = line
    print(line)
    return ok


def config(name, **changes):
    return dataclasses.replace(load_config(resolve_config(name)), **changes)


def by_variant(rows, value):
    return {r.variant: r for r in rows if r.axis_value == value}


def test_1_power_table():
    fd = power_fully_digital(8, TABLE1_FULLY_DIGITAL)
    hy = power_hybrid(8, 2, TABLE1_CONVENTIONAL_HYBRID)
    ts = power_hybrid(8, 2, TABLE1_TASK_SPECIFIC)
    ok = (fd, hy, ts) == (520, 410, 172)
    assert record(1, ok, f"fully digital {fd:g} mW, conventional hybrid {hy:g} mW, task-specific {ts:g} mW")


def test_2_excess_and_full_mse_agree():
    scenario = reference_scenario()
    bundle = build_covariances(scenario)
    adc = AdcModel(16)
    rng = np.random.default_rng(2)
    floor = mmse_floor(bundle)
    worst = 0.0
    for _ in range(100):
        A = rng.standard_normal((2, 8)) + 1j * rng.standard_normal((2, 8))
        full = mse_full(A, digital_filter(A, bundle, adc), scenario.desired_angles, scenario, adc)
        worst = max(worst, abs(full - (floor + ex_mse(A, bundle, adc))) / full)
    assert record(2, worst < 1e-9, f"max relative gap {worst:.2e} over 100 random combiners (tol 1e-9)")


def test_3_formula_vs_simulation():
    rows = validate_rows(config("reference", seed=3), levels=(8, 16, 64), n_trials=1_000_000)
    failed = [f"{name} b={b}: {err:.2%} > {tol:.0%}" for name, b, _, _, err, tol, ok in rows if not ok]
    detail = "all 9 combiner/resolution pairs within tolerance" if not failed else "; ".join(failed)
    assert record(3, not failed, detail)


def test_4_bits_ordering():
    cfg = config("fig6", sweep_values=(16,))
    r = by_variant(run_sweep(cfg), 16)
    nq, ts, ta, fd = (r[k].mse_analytic for k in ("no_quant", "task_specific", "task_agnostic", "fully_digital"))
    mc = [r[k].mse_monte_carlo for k in ("no_quant", "task_specific", "task_agnostic", "fully_digital")]
    ordered = nq < ts < ta < fd and mc[0] < mc[1] < mc[2] < mc[3]
    ok = ordered and ts <= 1.2 * nq and ta / ts >= 1.3
    assert record(
        4, ok,
        f"no-quant {nq:.4f} < TS {ts:.4f} < TA {ta:.4f} < FD {fd:.4f}; TS/floor {ts / nq:.3f} (<= 1.2); TA/TS {ta / ts:.2f} (>= 1.3)",
    )


def test_5_snr_ordering():
    cfg = config("fig7", sweep_values=(0, 2, 4, 6, 8, 10))
    rows = run_sweep(cfg, threads=3)
    bad = []
    for snr in cfg.sweep_values:
        r = by_variant(rows, snr)
        vals = [r[k].mse_analytic for k in ("no_quant", "task_specific", "task_agnostic", "fully_digital")]
        if not all(a < b for a, b in zip(vals, vals[1:])):
            bad.append(f"{snr} dB: {np.round(vals, 4).tolist()}")
    assert record(5, not bad, "ordering holds at 0..10 dB" if not bad else "; ".join(bad))


def test_6_robustness():
    cfg = config("fig8", sweep_values=(5,))
    r = by_variant(run_sweep(cfg), 5)
    rob, non = r["robust"].mse_analytic, r["task_specific"].mse_analytic
    rob_nom, non_nom = r["robust_nominal"].mse_analytic, r["task_specific_nominal"].mse_analytic
    ratio = non / rob
    ok = rob <= non and ratio >= 1.3 and rob_nom >= non_nom
    assert record(
        6, ok,
        f"worst case robust {rob:.4f} vs non-robust {non:.4f} (ratio {ratio:.2f} >= 1.3); nominal {rob_nom:.4f} >= {non_nom:.4f}",
    )


def test_7_mismatch_co_optimisation():
    cfg = config("fig11", sweep_values=(1.0,))
    r = by_variant(run_sweep(cfg), 1.0)
    ref, co, un = (r[k].mse_analytic for k in ("task_specific", "co_optimized", "mismatch_unaware"))
    ok = co <= 1.15 * ref and un > co and r["task_specific"].sparsity >= 0.25
    assert record(7, ok, f"co-optimised {co:.4f} vs reference {ref:.4f} (ratio {co / ref:.3f} <= 1.15); unaware {un:.4f}")


def test_8_beam_pattern():
    details, ok = [], True
    for name in ("fig12", "fig14"):
        cfg = config(name)
        s = cfg.scenario
        for variant, A in af_designs(cfg).items():
            if variant == "task_agnostic":
                continue
            att = af_sweep(A, None, s.spacing_ratio, s.desired_angles, s.interferer_angles).attenuation_db.min()
            need = 30.0 if variant == "task_specific" else 25.0
            ok &= att >= need
            details.append(f"{name} {variant} {att:.1f} dB (>= {need:.0f})")
    assert record(8, ok, "; ".join(details))


def test_9_property_suites():
    suites = ["test_scenario.py", "test_quantization.py", "test_constellation.py", "test_design.py", "test_robust.py"]
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-rw", "-p", "no:cacheprovider", *suites],
        cwd=TESTS, capture_output=True, text=True,
    )
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr[-200:]
    assert record(9, proc.returncode == 0, summary)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
