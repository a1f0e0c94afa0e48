"""Command-line entry point: ``taskbeam <command> [options]``.

Every command reads an experiment config (a TOML file, or the name of a
bundled config such as ``reference`` or ``fig6``) and writes plot-ready CSV or
JSON into ``--out-dir``. Stochastic commands need a seed, from the config or
``--seed``.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from taskbeam.constellation import MismatchedConstellation, build_ideal, load_mismatch
from taskbeam.design import algorithm1, digital_filter, ex_mse
from taskbeam.evaluation import (
    TABLE1_CONVENTIONAL_HYBRID,
    TABLE1_FULLY_DIGITAL,
    TABLE1_TASK_SPECIFIC,
    PowerProfile,
    af_sweep,
    default_af_grid,
    monte_carlo_mse,
    power_breakdown,
    power_fully_digital,
    power_hybrid,
    task_agnostic_combiner,
)
from taskbeam.experiments import ExperimentConfig, load_config, run_sweep, write_rows
from taskbeam.quantization import AdcModel, total_bits
from taskbeam.robust import algorithm2, mse_full, worst_case_mse
from taskbeam.scenario import build_covariances, mmse_floor

log = logging.getLogger("taskbeam")

AF_HEADER = ("variant", "angle_deg", "chain", "af_abs_db")
VALIDATE_HEADER = ("combiner", "levels", "mse_analytic", "mse_monte_carlo", "rel_error", "tolerance", "passed")


class CliError(Exception):
    """Invalid invocation or configuration; reported without a traceback."""


def bundled_configs() -> list:
    return sorted(p.name[:-5] for p in resources.files("taskbeam.configs").iterdir() if p.name.endswith(".toml"))


def resolve_config(name) -> Path | None:
    """A path to an existing file, or the bundled config of that name."""
    if name is None:
        return None
    path = Path(name)
    if path.is_file():
        return path
    bundled = resources.files("taskbeam.configs") / f"{name.removesuffix('.toml')}.toml"
    if bundled.is_file():
        return Path(str(bundled))
    raise CliError(f"config not found: {name} (bundled: {', '.join(bundled_configs())})")


def build_config(args) -> ExperimentConfig:
    path = resolve_config(args.config)
    try:
        cfg = load_config(path) if path else ExperimentConfig()
    except (ValueError, TypeError, FileNotFoundError) as exc:
        raise CliError(f"invalid config {path}: {exc}") from exc
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    for flag, key in (("levels", "levels"), ("eta", "loading_factor"), ("dither", "dithered"), ("trials", "n_trials")):
        value = getattr(args, flag, None)
        if value is not None:
            updates[key] = value
    for flag in ("epsilon_deg", "grid_per_axis"):
        value = getattr(args, flag, None)
        if value is not None:
            updates[flag] = value
    if getattr(args, "robust", False):
        updates["use_robust"] = True
    try:
        cfg = dataclasses.replace(cfg, **updates)
        # validate ADC settings early so bad flags fail before any work
        cfg.adc_for_chains(cfg.scenario.n_chains)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, payload: dict):
    path.write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
    return path


def _mismatch_design(cfg, args):
    """Design params with the mismatch file applied, if one was given."""
    if not getattr(args, "mismatch_file", None):
        return cfg.design
    shape = (cfg.scenario.n_chains, cfg.scenario.n_antennas)
    try:
        params = load_mismatch(args.mismatch_file, shape)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read mismatch file {args.mismatch_file}: {exc}") from exc
    ideal = build_ideal(cfg.design.resolution_bits or 4)
    return dataclasses.replace(cfg.design, mismatch=MismatchedConstellation(ideal, params))


def cmd_design(args) -> int:
    cfg = build_config(args)
    out = _out_dir(args)
    scenario = cfg.scenario
    bundle = build_covariances(scenario)
    adc = cfg.adc_for_chains(scenario.n_chains)
    result = algorithm1(bundle, adc, _mismatch_design(cfg, args))
    result.save(out / "design.json")
    floor = mmse_floor(bundle)
    summary = {
        "ex_mse": result.final_ex_mse,
        "int_rej": result.final_int_rej,
        "sparsity": result.achieved_sparsity,
        "mse_analytic": floor + result.final_ex_mse,
        "mmse_floor": floor,
        "levels": adc.levels,
        "total_bits": total_bits(scenario.n_chains, adc.levels),
        "loss_trace": result.loss_trace,
    }
    if cfg.seed is not None:
        summary["mse_monte_carlo"] = monte_carlo_mse(result.combiner, result.digital_filter, scenario, adc, cfg.n_trials, cfg.seed)
    _write_json(out / "design_summary.json", summary)
    print(f"ExMSE {result.final_ex_mse:.6g}  MSE {floor + result.final_ex_mse:.6g}  IntRej {result.final_int_rej:.4g}  sparsity {result.achieved_sparsity:.3f}")
    return 0


def cmd_robust_design(args) -> int:
    cfg = build_config(args)
    try:
        seed = cfg.require_seed()
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    out = _out_dir(args)
    scenario = cfg.scenario
    adc = cfg.adc_for_chains(scenario.n_chains)
    model = cfg.uncertainty()
    robust = algorithm2(scenario, adc, model, cfg.robust)
    plain = algorithm1(build_covariances(scenario), adc, cfg.design)
    robust.save(out / "robust_design.json")

    summary = {"epsilon_deg": cfg.epsilon_deg, "grid_per_axis": cfg.grid_per_axis, "n_draws": cfg.n_draws}
    for name, res in (("robust", robust), ("non_robust", plain)):
        worst, _ = worst_case_mse(res.combiner, res.digital_filter, scenario, adc, model, cfg.n_draws, seed)
        summary[name] = {
            "worst_case_mse": worst,
            "nominal_mse": mse_full(res.combiner, res.digital_filter, scenario.desired_angles, scenario, adc),
            "int_rej": res.final_int_rej,
            "sparsity": res.achieved_sparsity,
        }
    summary["robust"]["loss_trace"] = robust.loss_trace
    _write_json(out / "robust_summary.json", summary)
    print(
        f"worst-case MSE robust {summary['robust']['worst_case_mse']:.6g} vs non-robust {summary['non_robust']['worst_case_mse']:.6g}; "
        f"nominal {summary['robust']['nominal_mse']:.6g} vs {summary['non_robust']['nominal_mse']:.6g}"
    )
    return 0


def cmd_sweep(args) -> int:
    cfg = build_config(args)
    if cfg.sweep_axis is None:
        raise CliError("config has no [sweep] table")
    try:
        cfg.require_seed()
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    out = _out_dir(args)
    rows = run_sweep(cfg, threads=args.threads)
    path = write_rows(rows, out / f"sweep_{cfg.sweep_axis}.csv")
    _write_json(
        out / f"sweep_{cfg.sweep_axis}.json",
        {"axis": cfg.sweep_axis, "values": list(cfg.sweep_values), "seed": cfg.seed, "n_trials": cfg.n_trials, "csv": path.name, "rows": len(rows)},
    )
    print(f"wrote {len(rows)} rows to {path}")
    return 0


def af_designs(cfg: ExperimentConfig) -> dict:
    """Combiners whose beam patterns are reported: task-specific, robust, task-agnostic."""
    scenario = cfg.scenario
    adc = cfg.adc_for_chains(scenario.n_chains)
    bundle = build_covariances(scenario)
    return {
        "task_specific": algorithm1(bundle, adc, cfg.design).combiner,
        "robust": algorithm2(scenario, adc, cfg.uncertainty(), cfg.robust).combiner,
        "task_agnostic": task_agnostic_combiner(scenario),
    }


def cmd_af(args) -> int:
    cfg = build_config(args)
    out = _out_dir(args)
    scenario = cfg.scenario
    grid = default_af_grid()
    att_rows = []
    with (out / "af.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(AF_HEADER)
        for name, A in af_designs(cfg).items():
            table = af_sweep(A, grid, scenario.spacing_ratio, scenario.desired_angles, scenario.interferer_angles)
            db = table.gains_db()
            for j, angle in enumerate(grid):
                for p in range(A.shape[0]):
                    writer.writerow([name, repr(float(np.rad2deg(angle))), p, repr(float(db[p, j]))])
            if table.attenuation_db is not None:
                for p, values in enumerate(table.attenuation_db):
                    att_rows.append([name, p, *(repr(float(v)) for v in values)])
    header = ["variant", "chain"] + [f"interferer_{m + 1}_db" for m in range(scenario.n_interferers)]
    with (out / "af_attenuation.csv").open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(att_rows)
    for row in att_rows:
        print(f"{row[0]:>14} chain {row[1]}: " + ", ".join(f"{float(v):.1f} dB" for v in row[2:]))
    return 0


def power_table(args, cfg: ExperimentConfig | None = None) -> list:
    """Rows ``(receiver, total_mW, breakdown)`` for the three reference receivers."""
    n, p = 8, 2
    extra = {}
    if cfg is not None:
        n, p = cfg.scenario.n_antennas, cfg.scenario.n_chains
        extra = dict(cfg.power)
    ts = dataclasses.replace(TABLE1_TASK_SPECIFIC, **{k: v for k, v in extra.items() if k in {f.name for f in dataclasses.fields(PowerProfile)}})
    overrides = {}
    if args.gamma_sp is not None:
        overrides["sparsity_coeff"] = args.gamma_sp
    if args.vm_power is not None:
        overrides["p_vm"] = args.vm_power
    if args.adc_power is not None:
        overrides["p_adc"] = args.adc_power
    try:
        ts = dataclasses.replace(ts, **overrides)
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    return [
        ("fully_digital", power_fully_digital(n, TABLE1_FULLY_DIGITAL), power_breakdown(n, None, TABLE1_FULLY_DIGITAL)),
        ("conventional_hybrid", power_hybrid(n, p, TABLE1_CONVENTIONAL_HYBRID), power_breakdown(n, p, TABLE1_CONVENTIONAL_HYBRID)),
        ("task_specific_hybrid", power_hybrid(n, p, ts), power_breakdown(n, p, ts)),
    ]


def cmd_power(args) -> int:
    cfg = build_config(args) if args.config else None
    rows = power_table(args, cfg)
    print(f"{'receiver':<22}{'total_mW':>10}  " + "  ".join(f"{k:>9}" for k in rows[0][2]))
    for name, total, parts in rows:
        print(f"{name:<22}{total:>10.6g}  " + "  ".join(f"{v:>9.6g}" for v in parts.values()))
    if args.out_dir:
        out = _out_dir(args)
        with (out / "power.csv").open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["receiver", "total_mw", *rows[0][2]])
            for name, total, parts in rows:
                writer.writerow([name, repr(float(total)), *(repr(float(v)) for v in parts.values())])
    return 0


def validate_rows(cfg: ExperimentConfig, levels=(8, 16, 64), n_trials: int = 1_000_000) -> list:
    """Formula-vs-simulation oracle on three combiners and several ADC resolutions."""
    seed = cfg.require_seed()
    scenario = cfg.scenario
    bundle = build_covariances(scenario)
    floor = mmse_floor(bundle)
    rng = np.random.default_rng(np.random.SeedSequence(seed).spawn(1)[0])
    shape = (scenario.n_chains, scenario.n_antennas)
    combiners = {
        "gamma": bundle.gamma,
        "random": rng.standard_normal(shape) + 1j * rng.standard_normal(shape),
        "task_agnostic": task_agnostic_combiner(scenario),
    }
    rows = []
    streams = np.random.SeedSequence(seed).spawn(1 + len(combiners) * len(levels))[1:]
    k = 0
    for name, A in combiners.items():
        for b in levels:
            adc = AdcModel(b, cfg.loading_factor, cfg.dithered)
            B = digital_filter(A, bundle, adc)
            analytic = floor + ex_mse(A, bundle, adc)
            mc = monte_carlo_mse(A, B, scenario, adc, n_trials, streams[k])
            k += 1
            tol = 0.01 if b >= 64 else 0.05
            err = abs(mc - analytic) / analytic
            rows.append((name, b, analytic, mc, err, tol, err <= tol))
    return rows


def cmd_validate(args) -> int:
    cfg = build_config(args)
    try:
        cfg.require_seed()
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    rows = validate_rows(cfg, n_trials=args.trials or 1_000_000)
    for name, b, analytic, mc, err, tol, ok in rows:
        print(f"{'PASS' if ok else 'FAIL'} {name:<14} b={b:<3} analytic {analytic:.5f}  monte-carlo {mc:.5f}  rel.err {err:.4f} (tol {tol})")
    if args.out_dir:
        out = _out_dir(args)
        with (out / "validate.csv").open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(VALIDATE_HEADER)
            writer.writerows(rows)
    return 0 if all(r[-1] for r in rows) else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config file or bundled config name")
    common.add_argument("--seed", type=int, help="root seed for all random streams")
    common.add_argument("--out-dir", default=None, help="output directory (default: current directory)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweep points")
    common.add_argument("--log-level", default="WARNING")

    adc = argparse.ArgumentParser(add_help=False)
    adc.add_argument("--levels", type=int, help="ADC levels per real component (overrides the bit budget)")
    adc.add_argument("--eta", type=float, help="ADC loading factor")
    adc.add_argument("--dither", action=argparse.BooleanOptionalAction, default=None, help="non-subtractive dither on/off")
    adc.add_argument("--trials", type=int, help="Monte Carlo trials")

    robust = argparse.ArgumentParser(add_help=False)
    robust.add_argument("--epsilon-deg", type=float, help="AoA error margin in degrees")
    robust.add_argument("--grid-per-axis", type=int, help="uncertainty grid points per angle")

    parser = argparse.ArgumentParser(prog="taskbeam", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("design", parents=[common, adc], help="Algorithm 1 combiner design")
    p.add_argument("--mismatch-file", help="TOML file of VM gain/phase errors to co-optimise against")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("robust-design", parents=[common, adc, robust], help="AoA-robust design (Algorithm 2)")
    p.set_defaults(func=cmd_robust_design)

    p = sub.add_parser("sweep", parents=[common, adc, robust], help="MSE sweep over the config's axis")
    p.add_argument("--robust", action="store_true", help="add the robust design to bits/snr sweeps")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("af", parents=[common, adc, robust], help="beam patterns and interferer attenuation")
    p.set_defaults(func=cmd_af)

    p = sub.add_parser("power", parents=[common], help="receiver power estimates")
    p.add_argument("--gamma-sp", type=float, help="fraction of active VMs in the task-specific receiver")
    p.add_argument("--vm-power", type=float, help="per-VM power of the task-specific receiver (mW)")
    p.add_argument("--adc-power", type=float, help="per-ADC power of the task-specific receiver (mW)")
    p.set_defaults(func=cmd_power)

    p = sub.add_parser("validate", parents=[common, adc], help="closed-form MSE vs Monte Carlo oracle")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING), format="%(levelname)s %(name)s: %(message)s")
    if args.command != "power" and args.out_dir is None:
        args.out_dir = "."
    try:
        return args.func(args)
    except CliError as exc:
        print(f"taskbeam {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
