"""Monte Carlo MSE, beam patterns, power estimates and benchmark receivers.

Seeding: a run seed feeds ``numpy.random.SeedSequence``; Monte Carlo trials
are processed in fixed-size chunks and chunk ``i`` draws from
``SeedSequence(seed).spawn(n_chunks)[i]``, which is split again into a
signal stream and a dither stream. Results are therefore bit-stable for a
given seed and chunk size, whatever order chunks are evaluated in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from taskbeam._seeding import as_seed_sequence
from taskbeam.constellation import MismatchedConstellation, MismatchParams
from taskbeam.design import digital_filter, ex_mse
from taskbeam.quantization import AdcModel, adc_convert, component_power, dynamic_range
from taskbeam.robust import RobustProblem
from taskbeam.scenario import Scenario, build_covariances, mmse_floor, sample_received, steering_matrix

__all__ = [
    "PowerProfile",
    "TABLE1_FULLY_DIGITAL",
    "TABLE1_CONVENTIONAL_HYBRID",
    "TABLE1_TASK_SPECIFIC",
    "power_fully_digital",
    "power_hybrid",
    "power_breakdown",
    "analytic_mse",
    "monte_carlo_mse",
    "array_factor",
    "AfTable",
    "af_sweep",
    "default_af_grid",
    "Benchmark",
    "benchmark_fully_digital",
    "benchmark_task_agnostic",
    "task_agnostic_combiner",
    "draw_mismatch",
    "mismatch_mse",
]

CHUNK = 100_000


@dataclass(frozen=True)
class PowerProfile:
    """Per-component power draw in mW; ``sparsity_coeff`` is the active VM fraction."""

    p_lna: float = 20.0
    p_vm: float = 20.0
    p_mix: float = 15.0
    p_bb: float = 5.0
    p_adc: float = 10.0
    sparsity_coeff: float = 1.0

    def __post_init__(self):
        for name in ("p_lna", "p_vm", "p_mix", "p_bb", "p_adc"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        if not 0 <= self.sparsity_coeff <= 1:
            raise ValueError("sparsity_coeff must lie in [0, 1]")


TABLE1_FULLY_DIGITAL = PowerProfile()
TABLE1_CONVENTIONAL_HYBRID = PowerProfile()
TABLE1_TASK_SPECIFIC = PowerProfile(p_vm=10.0, p_adc=0.5, sparsity_coeff=0.75)


def power_fully_digital(n_antennas: int, profile: PowerProfile) -> float:
    """One LNA and mixer per antenna, two baseband stages and ADCs per antenna."""
    n = n_antennas
    return n * profile.p_lna + n * profile.p_mix + 2 * n * profile.p_bb + 2 * n * profile.p_adc


def power_hybrid(n_antennas: int, n_chains: int, profile: PowerProfile) -> float:
    """Active VMs in the N x P analog network plus P RF chains."""
    n, p = n_antennas, n_chains
    return profile.sparsity_coeff * n * p * profile.p_vm + p * profile.p_mix + 2 * p * profile.p_bb + 2 * p * profile.p_adc


def power_breakdown(n_antennas: int, n_chains: int | None, profile: PowerProfile) -> dict:
    """Per-component totals in mW; ``n_chains=None`` selects the fully-digital layout."""
    n = n_antennas
    if n_chains is None:
        return {"lna": n * profile.p_lna, "vm": 0.0, "mixer": n * profile.p_mix, "baseband": 2 * n * profile.p_bb, "adc": 2 * n * profile.p_adc}
    p = n_chains
    return {
        "lna": 0.0,
        "vm": profile.sparsity_coeff * n * p * profile.p_vm,
        "mixer": p * profile.p_mix,
        "baseband": 2 * p * profile.p_bb,
        "adc": 2 * p * profile.p_adc,
    }


def analytic_mse(A, scenario: Scenario, adc: AdcModel | None) -> float:
    """Closed-form MSE with the optimal linear digital stage."""
    bundle = build_covariances(scenario)
    return mmse_floor(bundle) + ex_mse(A, bundle, adc)


def monte_carlo_mse(A, B, scenario: Scenario, adc: AdcModel | None, n_trials: int, seed, chunk: int = CHUNK) -> float:
    """Empirical ``E||s - B Q(A x)||^2`` over ``n_trials`` snapshots.

    The shared ADC dynamic range follows from the exact combiner output
    power. ``adc=None`` skips quantization.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    A = np.asarray(A, dtype=complex)
    B = np.asarray(B, dtype=complex)
    gamma = None
    if adc is not None:
        power = component_power(A, build_covariances(scenario).cov_x)
        gamma = dynamic_range(adc, power) if power > 0 else 0.0
    n_chunks = math.ceil(n_trials / chunk)
    total = 0.0
    for i, ss in enumerate(as_seed_sequence(seed).spawn(n_chunks)):
        n = min(chunk, n_trials - i * chunk)
        sig_seed, dither_seed = ss.spawn(2)
        s, x = sample_received(scenario, n, sig_seed)
        z = x @ A.T
        if adc is not None:
            z = adc_convert(z, adc, gamma, dither_seed) if gamma > 0 else np.zeros_like(z)
        err = s - z @ B.T
        total += float(np.sum(err.real**2 + err.imag**2))
    return total / n_trials


def array_factor(A, chain_index: int, angle: float, spacing_ratio: float = 0.5) -> complex:
    """Gain of chain ``chain_index`` toward a plane wave from ``angle``."""
    A = np.asarray(A)
    if not 0 <= chain_index < A.shape[0]:
        raise IndexError(f"chain_index {chain_index} out of range for {A.shape[0]} chains")
    a = steering_matrix([angle], A.shape[1], spacing_ratio)[:, 0]
    return complex(A[chain_index] @ a)


def default_af_grid(n_points: int = 721) -> np.ndarray:
    return np.linspace(-np.pi / 2, np.pi / 2, n_points)


@dataclass
class AfTable:
    """Array factors on an angle grid plus per-chain interferer attenuation.

    ``attenuation_db[p, m]`` compares the strongest desired-angle gain of
    chain ``p`` with its gain toward interferer ``m``.
    """

    angles: np.ndarray
    gains: np.ndarray
    attenuation_db: np.ndarray | None = None

    def __post_init__(self):
        if not np.all(np.isfinite(self.gains)):
            raise ValueError("array factors must be finite")

    def gains_db(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return 20 * np.log10(np.abs(self.gains))


def af_sweep(A, angle_grid=None, spacing_ratio: float = 0.5, desired_angles=None, interferer_angles=None) -> AfTable:
    """Tabulate every chain's array factor and, given the AoAs, the nulling depth."""
    A = np.asarray(A, dtype=complex)
    angles = default_af_grid() if angle_grid is None else np.asarray(angle_grid, dtype=float)
    if angles.size == 0:
        raise ValueError("angle grid is empty")
    gains = A @ steering_matrix(angles, A.shape[1], spacing_ratio)
    att = None
    if desired_angles is not None and interferer_angles is not None and len(interferer_angles):
        ref = np.abs(A @ steering_matrix(desired_angles, A.shape[1], spacing_ratio)).max(axis=1)
        leak = np.abs(A @ steering_matrix(interferer_angles, A.shape[1], spacing_ratio))
        with np.errstate(divide="ignore", invalid="ignore"):
            att = 20 * np.log10(ref[:, None] / leak)
    return AfTable(angles=angles, gains=gains, attenuation_db=att)


@dataclass
class Benchmark:
    combiner: np.ndarray
    digital_filter: np.ndarray
    mse_analytic: float
    mse_monte_carlo: float | None


def _benchmark(A, scenario, adc, n_trials, seed):
    bundle = build_covariances(scenario)
    B = digital_filter(A, bundle, adc)
    mc = None if n_trials is None else monte_carlo_mse(A, B, scenario, adc, n_trials, seed)
    return Benchmark(A, B, mmse_floor(bundle) + ex_mse(A, bundle, adc), mc)


def benchmark_fully_digital(scenario: Scenario, adc: AdcModel | None, n_trials: int | None = None, seed=None) -> Benchmark:
    """One RF chain per antenna (``A = I``), 2N converters."""
    return _benchmark(np.eye(scenario.n_antennas, dtype=complex), scenario, adc, n_trials, seed)


def task_agnostic_combiner(scenario: Scenario) -> np.ndarray:
    """Conjugate beamformers toward the desired AoAs; spare chains are left off."""
    if scenario.n_chains < scenario.n_desired:
        raise ValueError("task-agnostic receiver needs at least one chain per desired source")
    A = np.zeros((scenario.n_chains, scenario.n_antennas), dtype=complex)
    A[: scenario.n_desired] = steering_matrix(scenario.desired_angles, scenario.n_antennas, scenario.spacing_ratio).conj().T
    return A


def benchmark_task_agnostic(scenario: Scenario, adc: AdcModel | None, n_trials: int | None = None, seed=None) -> Benchmark:
    return _benchmark(task_agnostic_combiner(scenario), scenario, adc, n_trials, seed)


def draw_mismatch(means: MismatchParams, spread: float = 0.1, seed=None) -> MismatchParams:
    """Independent per-VM draws uniform within ``+-spread`` (relative) of the means."""
    rng = np.random.default_rng(seed)
    values = {}
    for name in MismatchParams.FIELDS:
        mean = getattr(means, name)
        values[name] = mean * (1 + rng.uniform(-spread, spread, size=mean.shape))
    return MismatchParams(**values)


def mismatch_mse(
    codes,
    B,
    constellation: MismatchedConstellation,
    scenario: Scenario,
    adc: AdcModel | None,
    n_draws: int = 50,
    spread: float = 0.1,
    seed=None,
    n_trials: int | None = None,
):
    """MSE of fixed VM codes and filter over random hardware realisations.

    Draw ``i`` uses child ``i`` of ``SeedSequence(seed).spawn(n_draws)``,
    split into a mismatch stream and a Monte Carlo stream.

    Returns
    -------
    analytic : ndarray, shape (n_draws,)
    monte_carlo : ndarray or None
        Per-draw simulated MSE with ``n_trials // n_draws`` trials each
        (at least one), or ``None`` when ``n_trials`` is not given.
    """
    problem = RobustProblem(scenario, [scenario.desired_angles], adc)
    analytic = np.empty(n_draws)
    simulated = None if n_trials is None else np.empty(n_draws)
    for i, ss in enumerate(as_seed_sequence(seed).spawn(n_draws)):
        draw_seed, mc_seed = ss.spawn(2)
        draw = MismatchedConstellation(constellation.ideal, draw_mismatch(constellation.params, spread, draw_seed))
        A = draw.realize(*codes)
        analytic[i] = problem.mse(A, B)[0]
        if simulated is not None:
            simulated[i] = monte_carlo_mse(A, B, scenario, adc, max(1, n_trials // n_draws), mc_seed)
    return analytic, simulated
