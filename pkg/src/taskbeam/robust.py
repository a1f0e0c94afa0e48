"""Combiner design that is robust to AoA estimation errors.

The worst-case MSE over a grid of candidate AoAs is minimised through a
logarithmic barrier on the epigraph slack ``gamma``, alternating proximal
steps on the analog combiner ``A`` with gradient steps on the digital
filter ``B``.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from taskbeam.constellation import sparsity_fraction, unit_box_scale
from taskbeam.design import (
    DesignError,
    DesignParams,
    DesignResult,
    digital_filter,
    ex_mse,
    int_rej,
    int_rej_subgradient,
    l11_norm,
    refine_on_grid,
    soft_threshold,
)
from taskbeam.quantization import AdcModel, noise_factor
from taskbeam.scenario import Scenario, build_covariances

log = logging.getLogger(__name__)

__all__ = [
    "UncertaintyModel",
    "RobustParams",
    "RobustProblem",
    "aoa_grid",
    "mse_full",
    "robust_loss",
    "barrier",
    "step_combiner",
    "step_filter",
    "algorithm2",
    "draw_angles",
    "worst_case_mse",
]


@dataclass(frozen=True)
class UncertaintyModel:
    """AoAs known up to ``margin`` radians per source (an infinity-norm box)."""

    nominal_angles: tuple
    margin: float
    grid_per_axis: int = 3

    def __post_init__(self):
        object.__setattr__(self, "nominal_angles", tuple(float(a) for a in np.atleast_1d(self.nominal_angles)))
        if self.margin < 0:
            raise ValueError("margin must be nonnegative")
        if self.grid_per_axis < 1:
            raise ValueError("grid_per_axis must be >= 1")

    def contains(self, angles, tol: float = 1e-12) -> bool:
        return bool(np.max(np.abs(np.asarray(angles) - self.nominal_angles)) <= self.margin + tol)


@dataclass
class RobustParams(DesignParams):
    """Algorithm 2 hyperparameters on top of :class:`DesignParams`.

    ``max_iters`` and ``project_every`` count outer iterations here.
    """

    int_rej_weight: float = 0.3
    barrier_weight: float = 1e-2
    step_a: float = 0.1
    step_b: float = 0.1
    inner_iters: int = 20
    max_iters: int = 200
    project_every: int = 10
    margin_factor: float = 0.1
    max_backtracks: int = 30

    def __post_init__(self):
        super().__post_init__()
        for name in ("barrier_weight", "step_a", "step_b", "margin_factor"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.inner_iters < 1:
            raise ValueError("inner_iters must be >= 1")


def aoa_grid(model: UncertaintyModel) -> np.ndarray:
    """Cartesian grid of candidate AoAs; one row per point, duplicates removed."""
    axes = []
    for theta in model.nominal_angles:
        if model.margin == 0:
            axes.append(np.array([theta]))
        else:
            axes.append(np.linspace(theta - model.margin, theta + model.margin, model.grid_per_axis))
    return np.array(list(itertools.product(*axes)), dtype=float)


def draw_angles(model: UncertaintyModel, n_draws: int, seed=None) -> np.ndarray:
    """Uniform random AoAs inside the uncertainty box, one row per draw."""
    rng = np.random.default_rng(seed)
    theta = np.asarray(model.nominal_angles)
    return theta + rng.uniform(-model.margin, model.margin, size=(n_draws, theta.size))


class RobustProblem:
    """Statistics at a fixed set of AoA hypotheses, stacked for vectorised use.

    Parameters
    ----------
    scenario : Scenario
        Supplies everything except the desired AoAs.
    angle_sets : array_like, shape (C, K)
    adc : AdcModel or None
    """

    def __init__(self, scenario: Scenario, angle_sets, adc: AdcModel | None):
        self.scenario = scenario
        self.adc = adc
        self.angle_sets = np.atleast_2d(np.asarray(angle_sets, dtype=float))
        bundles = [build_covariances(scenario.with_angles(t)) for t in self.angle_sets]
        self.cov_x = np.stack([b.cov_x for b in bundles])
        self.cross_sx = np.stack([b.cross_sx for b in bundles])
        self.trace_s = float(np.trace(scenario.cov_s).real)
        self.steering_interf = bundles[0].steering_interf
        self.c = noise_factor(adc, scenario.n_chains)

    def __len__(self):
        return len(self.angle_sets)

    def mse(self, A, B) -> np.ndarray:
        """Full MSE at every hypothesis for the pair ``(A, B)``."""
        A = np.asarray(A, dtype=complex)
        B = np.asarray(B, dtype=complex)
        AC = A @ self.cov_x  # (C, P, N)
        R = AC @ A.conj().T  # (C, P, P)
        T = np.trace(R, axis1=1, axis2=2).real
        cross = np.einsum("ckn,pn,kp->c", self.cross_sx, A.conj(), B.conj()).real
        quad = np.einsum("kp,cpq,kq->c", B, R, B.conj()).real
        return self.trace_s - 2.0 * cross + quad + self.c * T * np.vdot(B, B).real

    def penalties(self, A, params: DesignParams) -> float:
        return params.int_rej_weight * int_rej(A, self.steering_interf) + params.sparsity_weight * l11_norm(A)

    def grad_a(self, A, B, weights) -> np.ndarray:
        """``sum_c w_c dMSE_c/dA``."""
        cw = np.tensordot(weights, self.cov_x, axes=1)
        sw = np.tensordot(weights, self.cross_sx, axes=1)
        bh = B.conj().T
        return -2.0 * bh @ sw + 2.0 * bh @ B @ A @ cw + 2.0 * self.c * np.vdot(B, B).real * A @ cw

    def grad_b(self, A, B, weights) -> np.ndarray:
        """``sum_c w_c dMSE_c/dB``."""
        ah = A.conj().T
        sw = np.tensordot(weights, self.cross_sx, axes=1)
        R = A @ self.cov_x @ ah
        T = np.trace(R, axis1=1, axis2=2).real
        rw = np.tensordot(weights, R, axes=1)
        return -2.0 * sw @ ah + 2.0 * B @ rw + 2.0 * self.c * float(weights @ T) * B

    def barrier(self, A, gamma, B, params: RobustParams) -> float:
        gap = gamma - self.mse(A, B)
        if np.any(gap <= 0):
            return math.inf
        return float(gamma - params.barrier_weight * np.log(gap).sum() + self.penalties(A, params))

    def barrier_weights(self, A, gamma, B, params: RobustParams) -> np.ndarray:
        return params.barrier_weight / (gamma - self.mse(A, B))


def mse_full(A, B, angles, scenario: Scenario, adc: AdcModel | None) -> float:
    """MSE of the estimate ``B Q(A x)`` when the true AoAs are ``angles``."""
    return float(RobustProblem(scenario, [angles], adc).mse(A, B)[0])


def robust_loss(A, B, angles, scenario: Scenario, adc: AdcModel | None, params: DesignParams) -> float:
    problem = RobustProblem(scenario, [angles], adc)
    return float(problem.mse(A, B)[0] + problem.penalties(A, params))


def barrier(A, gamma, B, problem: RobustProblem, params: RobustParams) -> float:
    """Barrier surrogate of the worst-case loss; ``inf`` when infeasible."""
    return problem.barrier(A, gamma, B, params)


def step_combiner(A, gamma, B, problem: RobustProblem, params: RobustParams, step=None):
    """Proximal step on ``(A, gamma)`` with backtracking.

    Returns
    -------
    A, gamma : new iterate (the input when backtracking is exhausted)
    stalled : bool
    """
    w = problem.barrier_weights(A, gamma, B, params)
    grad = problem.grad_a(A, B, w)
    if params.int_rej_weight:
        grad = grad + params.int_rej_weight * int_rej_subgradient(A, problem.steering_interf)
    grad_gamma = 1.0 - w.sum()
    f0 = problem.barrier(A, gamma, B, params)
    mu = params.step_a if step is None else step
    for _ in range(params.max_backtracks + 1):
        a_new = soft_threshold(A - mu * grad, mu * params.sparsity_weight)
        g_new = gamma - mu * grad_gamma
        if problem.barrier(a_new, g_new, B, params) <= f0:
            return a_new, g_new, False
        mu *= 0.5
    return A, gamma, True


def step_filter(A, gamma, B, problem: RobustProblem, params: RobustParams, step=None):
    """Gradient step on ``(B, gamma)`` with backtracking; see :func:`step_combiner`."""
    w = problem.barrier_weights(A, gamma, B, params)
    grad = problem.grad_b(A, B, w)
    grad_gamma = 1.0 - w.sum()
    f0 = problem.barrier(A, gamma, B, params)
    mu = params.step_b if step is None else step
    for _ in range(params.max_backtracks + 1):
        b_new = B - mu * grad
        g_new = gamma - mu * grad_gamma
        if problem.barrier(A, g_new, b_new, params) <= f0:
            return b_new, g_new, False
        mu *= 0.5
    return B, gamma, True


def _slack(problem, A, B, params):
    worst = float(problem.mse(A, B).max() + problem.penalties(A, params))
    return worst + params.margin_factor * (1.0 + abs(worst))


def _polish(codes, B, constellation, problem, params, rounds=3):
    """Alternate neighbour search on the VM codes with filter re-optimisation.

    The codes are refined against the worst grid loss with ``B`` held fixed,
    then ``B`` takes ``10 * inner_iters`` barrier steps from a fresh slack.
    """
    def worst(M):
        return float(problem.mse(M, B).max() + problem.penalties(M, params))

    for _ in range(rounds):
        codes, _ = refine_on_grid(codes, constellation, worst)
        A = constellation.realize(*codes)
        gamma = _slack(problem, A, B, params)
        for _ in range(10 * params.inner_iters):
            B, gamma, _ = step_filter(A, gamma, B, problem, params)
    return codes, constellation.realize(*codes), B


def algorithm2(
    scenario: Scenario,
    adc: AdcModel | None,
    uncertainty: UncertaintyModel,
    params: RobustParams | None = None,
    initial=None,
) -> DesignResult:
    """Robust combiner and filter design over the AoA uncertainty grid.

    ``loss_trace`` records the worst grid MSE after every outer iteration.
    The returned filter is the jointly optimised one, not the nominal LMMSE
    filter. With a constellation and ``params.refine`` the projected result
    is polished by :func:`_polish`.
    """
    params = params or RobustParams()
    nominal = scenario.with_angles(uncertainty.nominal_angles)
    bundle = build_covariances(nominal)
    problem = RobustProblem(nominal, aoa_grid(uncertainty), adc)
    constellation = params.constellation()

    A = np.array(bundle.gamma if initial is None else initial, dtype=complex)
    A = A / unit_box_scale(A)
    B = digital_filter(A, bundle, adc)

    trace, stalls = [], 0
    codes = None
    for k in range(1, params.max_iters + 1):
        gamma = _slack(problem, A, B, params)
        for _ in range(params.inner_iters):
            A, gamma, stalled = step_combiner(A, gamma, B, problem, params)
            stalls += stalled
        if constellation is not None and (k % params.project_every == 0 or k == params.max_iters):
            s = unit_box_scale(A)
            codes = constellation.project_codes(A / s)
            A, B = constellation.realize(*codes), B * s
            if not math.isfinite(problem.barrier(A, gamma, B, params)):
                gamma = _slack(problem, A, B, params)
        for _ in range(params.inner_iters):
            B, gamma, stalled = step_filter(A, gamma, B, problem, params)
            stalls += stalled
        worst = float(problem.mse(A, B).max())
        if not math.isfinite(worst):
            raise DesignError(f"non-finite worst-case MSE at outer iteration {k}", trace)
        trace.append(worst)

    if constellation is not None and params.refine:
        codes = constellation.project_codes(A / unit_box_scale(A)) if codes is None else codes
        codes, A, B = _polish(codes, B, constellation, problem, params)

    grid_mse = problem.mse(A, B)
    return DesignResult(
        combiner=A,
        digital_filter=B,
        loss_trace=trace,
        final_ex_mse=ex_mse(A, bundle, adc),
        final_int_rej=int_rej(A, bundle.steering_interf),
        achieved_sparsity=sparsity_fraction(A),
        codes=codes,
        metadata={
            "margin_rad": uncertainty.margin,
            "grid_points": len(problem),
            "grid_worst_mse": float(grid_mse.max()),
            "nominal_mse": float(RobustProblem(nominal, [uncertainty.nominal_angles], adc).mse(A, B)[0]),
            "stalled_steps": int(stalls),
            "int_rej_weight": params.int_rej_weight,
        },
    )


def worst_case_mse(A, B, scenario: Scenario, adc: AdcModel | None, uncertainty: UncertaintyModel, n_draws: int = 200, seed=None):
    """Largest full MSE over random AoA draws in the uncertainty box.

    Returns
    -------
    worst : float
    values : ndarray, shape (n_draws,)
    """
    draws = draw_angles(uncertainty, n_draws, seed)
    values = RobustProblem(scenario, draws, adc).mse(A, B)
    return float(values.max()), values

