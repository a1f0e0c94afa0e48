"""Experiment configuration and parameter sweeps producing plot-ready rows.

Seeding scheme: the run seed roots a ``numpy.random.SeedSequence``. Sweep
point ``i`` uses child ``i`` of ``spawn(len(values))``; that child is spawned
once more into one stream per receiver variant in :data:`VARIANT_ORDER`.
Rows are identical whatever the worker count or completion order.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from taskbeam._seeding import as_seed_sequence
from taskbeam._toml import load_toml
from taskbeam.constellation import MismatchedConstellation, MismatchParams, build_ideal, mismatch_from_dict
from taskbeam.design import DesignParams, algorithm1
from taskbeam.evaluation import (
    benchmark_fully_digital,
    benchmark_task_agnostic,
    mismatch_mse,
    monte_carlo_mse,
)
from taskbeam.quantization import AdcModel, levels_for_budget, total_bits
from taskbeam.robust import RobustParams, RobustProblem, UncertaintyModel, algorithm2, draw_angles
from taskbeam.scenario import Scenario, build_covariances, mmse_floor, reference_scenario, scenario_from_dict, load_scenario

log = logging.getLogger(__name__)

__all__ = [
    "AXES",
    "CSV_HEADER",
    "VARIANT_ORDER",
    "ExperimentConfig",
    "SweepRow",
    "load_config",
    "run_sweep",
    "write_rows",
    "mismatch_means",
]

AXES = ("bits", "snr_db", "epsilon_deg", "mismatch")
CSV_HEADER = ("axis_value", "variant", "mse_analytic", "mse_monte_carlo", "sparsity", "total_bits")
VARIANT_ORDER = (
    "no_quant",
    "fully_digital",
    "task_agnostic",
    "task_specific",
    "robust",
    "task_specific_nominal",
    "robust_nominal",
    "co_optimized",
    "mismatch_unaware",
)


@dataclass
class ExperimentConfig:
    """Everything a command needs besides the output location.

    ``levels``, when set, fixes the hybrid receivers' ADC level count and
    overrides ``total_bits``; the fully-digital benchmark always gets the
    level count that fits ``total_bits`` over its 2N converters.
    """

    scenario: Scenario = field(default_factory=reference_scenario)
    seed: int | None = None
    n_trials: int = 100_000
    total_bits: int = 16
    levels: int | None = None
    loading_factor: float = 3.0
    dithered: bool = True
    design: DesignParams = field(default_factory=DesignParams)
    robust: RobustParams = field(default_factory=RobustParams)
    epsilon_deg: float = 5.0
    grid_per_axis: int = 3
    n_draws: int = 200
    use_robust: bool = False
    mismatch: dict | None = None
    mismatch_draws: int = 50
    mismatch_spread: float = 0.1
    sweep_axis: str | None = None
    sweep_values: tuple = ()
    power: dict = field(default_factory=dict)

    def adc_for_chains(self, n_chains: int, bits: int | None = None) -> AdcModel:
        if self.levels is not None and bits is None:
            levels = self.levels
        else:
            levels = levels_for_budget(self.total_bits if bits is None else bits, n_chains)
        return AdcModel(levels, self.loading_factor, self.dithered)

    def uncertainty(self, scenario: Scenario | None = None, epsilon_deg: float | None = None) -> UncertaintyModel:
        scenario = scenario or self.scenario
        eps = self.epsilon_deg if epsilon_deg is None else epsilon_deg
        return UncertaintyModel(scenario.desired_angles, float(np.deg2rad(eps)), self.grid_per_axis)

    def require_seed(self) -> int:
        if self.seed is None:
            raise ValueError("a seed is required for stochastic runs (set `seed` in the config or pass --seed)")
        return self.seed


_DESIGN_KEYS = {f.name for f in dataclasses.fields(DesignParams)} - {"mismatch"}
_ROBUST_KEYS = {f.name for f in dataclasses.fields(RobustParams)} - {"mismatch"}


def _config_from_dict(data: dict, base: Path) -> ExperimentConfig:
    data = dict(data)
    kw = {}
    if "scenario_file" in data:
        path = Path(data.pop("scenario_file"))
        kw["scenario"] = load_scenario(path if path.is_absolute() else base / path)
    if "scenario" in data:
        kw["scenario"] = scenario_from_dict(data.pop("scenario"))
    for key in ("seed", "n_trials"):
        if key in data:
            kw[key] = int(data.pop(key))
    adc = data.pop("adc", {})
    for key, cast in (("total_bits", int), ("levels", int), ("loading_factor", float), ("dithered", bool)):
        if key in adc:
            kw[key] = cast(adc.pop(key))
    if adc:
        raise ValueError(f"unknown [adc] keys: {sorted(adc)}")

    design = data.pop("design", {})
    unknown = set(design) - _DESIGN_KEYS
    if unknown:
        raise ValueError(f"unknown [design] keys: {sorted(unknown)}")
    kw["design"] = DesignParams(**design)

    robust = dict(data.pop("robust", {}))
    for key, cast in (("epsilon_deg", float), ("grid_per_axis", int), ("n_draws", int)):
        if key in robust:
            kw[key] = cast(robust.pop(key))
    if "enabled" in robust:
        kw["use_robust"] = bool(robust.pop("enabled"))
    unknown = set(robust) - _ROBUST_KEYS
    if unknown:
        raise ValueError(f"unknown [robust] keys: {sorted(unknown)}")
    shared = {k: design[k] for k in ("resolution_bits", "sparsity_weight", "target_sparsity") if k in design}
    kw["robust"] = RobustParams(**{**shared, **robust})

    if "mismatch" in data:
        mism = dict(data.pop("mismatch"))
        kw["mismatch_draws"] = int(mism.pop("n_draws", 50))
        kw["mismatch_spread"] = float(mism.pop("spread", 0.1))
        kw["mismatch"] = mism

    sweep = data.pop("sweep", None)
    if sweep is not None:
        axis = sweep.get("axis")
        if axis not in AXES:
            raise ValueError(f"sweep axis must be one of {AXES}, got {axis!r}")
        extra = set(sweep) - {"axis", "values"}
        if extra:
            raise ValueError(f"[sweep] takes exactly one axis; unexpected keys {sorted(extra)}")
        kw["sweep_axis"] = axis
        kw["sweep_values"] = tuple(float(v) for v in sweep.get("values", ()))
        if not kw["sweep_values"]:
            raise ValueError("sweep needs a non-empty `values` list")
    if "power" in data:
        kw["power"] = dict(data.pop("power"))
    if data:
        raise ValueError(f"unknown config keys: {sorted(data)}")
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    return _config_from_dict(load_toml(path), path.parent)


def mismatch_means(table: dict, shape, scale: float = 1.0) -> MismatchParams:
    """Mismatch means from a config table, every value multiplied by ``scale``."""
    scaled = {k: np.asarray(v, dtype=float) * scale for k, v in table.items()}
    return mismatch_from_dict(scaled, shape)


@dataclass(frozen=True)
class SweepRow:
    axis_value: float
    variant: str
    mse_analytic: float
    mse_monte_carlo: float
    sparsity: float
    total_bits: int

    def as_tuple(self):
        return (self.axis_value, self.variant, self.mse_analytic, self.mse_monte_carlo, self.sparsity, self.total_bits)


def _streams(ss):
    return dict(zip(VARIANT_ORDER, as_seed_sequence(ss).spawn(len(VARIANT_ORDER))))


def _standard_point(cfg: ExperimentConfig, scenario: Scenario, bits: int, value: float, ss, include_robust: bool):
    """No-quant, fully-digital, task-agnostic and task-specific rows (plus robust)."""
    seeds = _streams(ss)
    bundle = build_covariances(scenario)
    P, N = scenario.n_chains, scenario.n_antennas
    rows = []

    floor = mmse_floor(bundle)
    eye = np.eye(N, dtype=complex)
    mc = monte_carlo_mse(eye, bundle.gamma, scenario, None, cfg.n_trials, seeds["no_quant"])
    rows.append(SweepRow(value, "no_quant", floor, mc, 0.0, 0))

    if bits >= 2 * N:
        fd_adc = AdcModel(levels_for_budget(bits, N), cfg.loading_factor, cfg.dithered)
        fd = benchmark_fully_digital(scenario, fd_adc, cfg.n_trials, seeds["fully_digital"])
        rows.append(SweepRow(value, "fully_digital", fd.mse_analytic, fd.mse_monte_carlo, 0.0, total_bits(N, fd_adc.levels)))

    adc = cfg.adc_for_chains(P, bits if cfg.sweep_axis == "bits" else None)
    ta = benchmark_task_agnostic(scenario, adc, cfg.n_trials, seeds["task_agnostic"])
    rows.append(SweepRow(value, "task_agnostic", ta.mse_analytic, ta.mse_monte_carlo, float(np.mean(ta.combiner == 0)), total_bits(P, adc.levels)))

    ts = algorithm1(bundle, adc, cfg.design)
    ts_mc = monte_carlo_mse(ts.combiner, ts.digital_filter, scenario, adc, cfg.n_trials, seeds["task_specific"])
    rows.append(SweepRow(value, "task_specific", floor + ts.final_ex_mse, ts_mc, ts.achieved_sparsity, total_bits(P, adc.levels)))

    if include_robust:
        rb = algorithm2(scenario, adc, cfg.uncertainty(scenario), cfg.robust)
        mse = RobustProblem(scenario, [scenario.desired_angles], adc).mse(rb.combiner, rb.digital_filter)[0]
        rb_mc = monte_carlo_mse(rb.combiner, rb.digital_filter, scenario, adc, cfg.n_trials, seeds["robust"])
        rows.append(SweepRow(value, "robust", float(mse), rb_mc, rb.achieved_sparsity, total_bits(P, adc.levels)))
    return rows


def _epsilon_point(cfg: ExperimentConfig, eps_deg: float, ss):
    """Worst case over random AoA draws and nominal MSE, robust vs non-robust."""
    seeds = _streams(ss)
    scenario = cfg.scenario
    P = scenario.n_chains
    adc = cfg.adc_for_chains(P)
    bits = total_bits(P, adc.levels)
    bundle = build_covariances(scenario)
    model = cfg.uncertainty(scenario, eps_deg)

    designs = {
        "task_specific": algorithm1(bundle, adc, cfg.design),
        "robust": algorithm2(scenario, adc, model, cfg.robust),
    }
    draws = draw_angles(model, cfg.n_draws, seeds["no_quant"])
    test = RobustProblem(scenario, draws, adc)
    nominal = RobustProblem(scenario, [scenario.desired_angles], adc)
    rows = []
    for name, res in designs.items():
        A, B = res.combiner, res.digital_filter
        values = test.mse(A, B)
        worst = int(np.argmax(values))
        worst_scn = scenario.with_angles(draws[worst])
        mc = monte_carlo_mse(A, B, worst_scn, adc, cfg.n_trials, seeds[name])
        rows.append(SweepRow(eps_deg, name, float(values[worst]), mc, res.achieved_sparsity, bits))
        mc_nom = monte_carlo_mse(A, B, scenario, adc, cfg.n_trials, seeds[name + "_nominal"])
        rows.append(SweepRow(eps_deg, name + "_nominal", float(nominal.mse(A, B)[0]), mc_nom, res.achieved_sparsity, bits))
    return rows


def _mismatch_point(cfg: ExperimentConfig, scale: float, ss):
    """Ideal reference, mismatch-aware and mismatch-unaware designs at one error scale."""
    if cfg.mismatch is None:
        raise ValueError("mismatch sweep needs a [mismatch] table")
    seeds = _streams(ss)
    scenario = cfg.scenario
    P, N = scenario.n_chains, scenario.n_antennas
    adc = cfg.adc_for_chains(P)
    bits = total_bits(P, adc.levels)
    bundle = build_covariances(scenario)
    floor = mmse_floor(bundle)
    ideal = build_ideal(cfg.design.resolution_bits or 4)
    mism = MismatchedConstellation(ideal, mismatch_means(cfg.mismatch, (P, N), scale))

    ref = algorithm1(bundle, adc, dataclasses.replace(cfg.design, mismatch=None, resolution_bits=ideal.resolution_bits))
    ref_mc = monte_carlo_mse(ref.combiner, ref.digital_filter, scenario, adc, cfg.n_trials, seeds["task_specific"])
    rows = [SweepRow(scale, "task_specific", floor + ref.final_ex_mse, ref_mc, ref.achieved_sparsity, bits)]

    co = algorithm1(bundle, adc, dataclasses.replace(cfg.design, mismatch=mism))
    for name, res in (("co_optimized", co), ("mismatch_unaware", ref)):
        values, mc = mismatch_mse(
            res.codes, res.digital_filter, mism, scenario, adc,
            cfg.mismatch_draws, cfg.mismatch_spread, seeds[name], n_trials=cfg.n_trials,
        )
        rows.append(SweepRow(scale, name, float(values.mean()), float(mc.mean()), res.achieved_sparsity, bits))
    return rows


def _point(cfg: ExperimentConfig, index: int, value: float, ss):
    axis = cfg.sweep_axis
    if axis == "bits":
        return _standard_point(cfg, cfg.scenario, int(value), value, ss, cfg.use_robust)
    if axis == "snr_db":
        return _standard_point(cfg, cfg.scenario.with_snr(value), cfg.total_bits, value, ss, cfg.use_robust)
    if axis == "epsilon_deg":
        return _epsilon_point(cfg, value, ss)
    if axis == "mismatch":
        return _mismatch_point(cfg, value, ss)
    raise ValueError(f"unknown sweep axis {axis!r}")


def run_sweep(cfg: ExperimentConfig, threads: int = 1) -> list:
    """Evaluate every sweep point; rows come back in axis order."""
    if cfg.sweep_axis is None:
        raise ValueError("config has no [sweep] table")
    seed = cfg.require_seed()
    children = as_seed_sequence(seed).spawn(len(cfg.sweep_values))
    jobs = list(zip(range(len(children)), cfg.sweep_values, children))
    if threads <= 1:
        chunks = [_point(cfg, *job) for job in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda job: _point(cfg, *job), jobs))
    return [row for chunk in chunks for row in chunk]


def write_rows(rows, path):
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row.as_tuple()])
    return path
