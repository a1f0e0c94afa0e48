"""Task-specific analog combiner design for known AoAs.

The combiner is optimised by proximal gradient descent on
``ex_mse + int_rej_weight * int_rej + sparsity_weight * ||A||_1`` with
periodic projection onto the VM constellation.

Gradients of real functions of a complex matrix are returned as
``df/dRe(A) + j df/dIm(A)``; ``A - mu * grad`` is a descent step.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from taskbeam.constellation import (
    MismatchedConstellation,
    build_ideal,
    sparsity_fraction,
    unit_box_scale,
)
from taskbeam.quantization import AdcModel, noise_factor
from taskbeam.scenario import CovarianceBundle

log = logging.getLogger(__name__)

__all__ = [
    "DesignError",
    "DesignParams",
    "DesignResult",
    "ex_mse",
    "ex_mse_grad",
    "digital_filter",
    "int_rej",
    "int_rej_subgradient",
    "l11_norm",
    "loss",
    "soft_threshold",
    "proximal_step",
    "refine_on_grid",
    "prune_codes",
    "algorithm1",
]


class DesignError(RuntimeError):
    """Iteration produced a non-finite loss; ``trace`` holds the losses so far."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


@dataclass
class DesignParams:
    """Hyperparameters of the combiner design.

    ``resolution_bits=None`` leaves the combiner unconstrained. When
    ``target_sparsity`` is set, ``sparsity_weight`` is tuned by bisection.
    ``mismatch`` replaces the ideal grid by per-entry corrupted sets; the
    mismatch-free design is then also tried as a starting point.
    ``refine`` enables the neighbour search on the final projected combiner.
    """

    int_rej_weight: float = 0.03
    sparsity_weight: float = 0.0
    step_size: float = 1.0
    max_iters: int = 500
    project_every: int = 10
    resolution_bits: int | None = 4
    target_sparsity: float | None = None
    mismatch: MismatchedConstellation | None = None
    refine: bool = True

    def __post_init__(self):
        if self.int_rej_weight < 0 or self.sparsity_weight < 0:
            raise ValueError("regularisation weights must be nonnegative")
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.max_iters < 1 or self.project_every < 1:
            raise ValueError("max_iters and project_every must be >= 1")
        if self.project_every > self.max_iters:
            raise ValueError("project_every cannot exceed max_iters")
        if self.target_sparsity is not None and not 0 <= self.target_sparsity < 1:
            raise ValueError("target_sparsity must lie in [0, 1)")
        if self.mismatch is not None:
            self.resolution_bits = self.mismatch.resolution_bits

    def constellation(self):
        if self.mismatch is not None:
            return self.mismatch
        if self.resolution_bits is None:
            return None
        return build_ideal(self.resolution_bits)


@dataclass
class DesignResult:
    """Designed combiner ``A``, digital filter ``B`` and run diagnostics.

    ``codes`` holds the integer I/Q settings (two P x N arrays) that produce
    ``combiner`` on the governing constellation, when there is one.
    """

    combiner: np.ndarray
    digital_filter: np.ndarray
    loss_trace: list
    final_ex_mse: float
    final_int_rej: float
    achieved_sparsity: float
    codes: tuple | None = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def cplx(m):
            m = np.asarray(m)
            return {"shape": list(m.shape), "re": m.real.ravel().tolist(), "im": m.imag.ravel().tolist()}

        return {
            "combiner": cplx(self.combiner),
            "digital_filter": cplx(self.digital_filter),
            "loss_trace": [float(v) for v in self.loss_trace],
            "final_ex_mse": float(self.final_ex_mse),
            "final_int_rej": float(self.final_int_rej),
            "achieved_sparsity": float(self.achieved_sparsity),
            "codes": None if self.codes is None else [np.asarray(c).tolist() for c in self.codes],
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DesignResult":
        def cplx(d):
            return (np.asarray(d["re"], dtype=float) + 1j * np.asarray(d["im"], dtype=float)).reshape(d["shape"])

        codes = data.get("codes")
        return cls(
            combiner=cplx(data["combiner"]),
            digital_filter=cplx(data["digital_filter"]),
            loss_trace=list(data["loss_trace"]),
            final_ex_mse=data["final_ex_mse"],
            final_int_rej=data["final_int_rej"],
            achieved_sparsity=data["achieved_sparsity"],
            codes=None if codes is None else tuple(np.asarray(c, dtype=int) for c in codes),
            metadata=data.get("metadata", {}),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path) -> "DesignResult":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _regularised_cov(A, cov_x, adc):
    """``A C_x A^H + c Tr(A C_x A^H) I`` and the scale ``c``."""
    c = noise_factor(adc, A.shape[0])
    r = A @ cov_x @ A.conj().T
    return r + c * np.trace(r).real * np.eye(A.shape[0]), c


def _prior_trace(bundle):
    g = bundle.gamma
    return float(np.trace(g @ bundle.cov_x @ g.conj().T).real)


def ex_mse(A, bundle: CovarianceBundle, adc: AdcModel | None) -> float:
    """Excess MSE over the unquantized LMMSE estimate, with the optimal filter.

    ``adc=None`` means unquantized acquisition. A zero combiner conveys
    nothing and returns ``Tr(Gamma C_x Gamma^H)``.
    """
    A = np.asarray(A, dtype=complex)
    if not A.any():
        return _prior_trace(bundle)
    r, _ = _regularised_cov(A, bundle.cov_x, adc)
    u = A @ bundle.cov_x @ bundle.gamma.conj().T
    return float(_prior_trace(bundle) - np.trace(u.conj().T @ np.linalg.solve(r, u)).real)


def ex_mse_grad(A, bundle: CovarianceBundle, adc: AdcModel | None) -> np.ndarray:
    """Analytic gradient of :func:`ex_mse` (zero at ``A = 0``)."""
    A = np.asarray(A, dtype=complex)
    if not A.any():
        return np.zeros_like(A)
    cx, g = bundle.cov_x, bundle.gamma
    r, c = _regularised_cov(A, cx, adc)
    w = np.linalg.solve(r, A @ cx @ g.conj().T)
    wwh = w @ w.conj().T
    return -2.0 * (w @ g @ cx - wwh @ A @ cx - c * np.trace(wwh).real * A @ cx)


def digital_filter(A, bundle: CovarianceBundle, adc: AdcModel | None) -> np.ndarray:
    """LMMSE filter from the quantized chain outputs to the task vector."""
    A = np.asarray(A, dtype=complex)
    K = bundle.gamma.shape[0]
    if not A.any():
        return np.zeros((K, A.shape[0]), dtype=complex)
    r, _ = _regularised_cov(A, bundle.cov_x, adc)
    rhs = bundle.gamma @ bundle.cov_x @ A.conj().T
    # B r = rhs with r Hermitian
    return np.linalg.solve(r, rhs.conj().T).conj().T


def int_rej(A, steering_interf) -> float:
    """Largest interferer leakage ``max |[A M_phi]_ij|`` (0 without interferers)."""
    steering_interf = np.asarray(steering_interf)
    if steering_interf.size == 0:
        return 0.0
    return float(np.abs(np.asarray(A) @ steering_interf).max())


def int_rej_subgradient(A, steering_interf) -> np.ndarray:
    """Gradient of the active leakage entry; ties go to the lowest flat index."""
    A = np.asarray(A, dtype=complex)
    out = np.zeros_like(A)
    steering_interf = np.asarray(steering_interf)
    if steering_interf.size == 0:
        return out
    y = A @ steering_interf
    i, j = np.unravel_index(np.argmax(np.abs(y)), y.shape)
    mag = abs(y[i, j])
    if mag > 0:
        out[i, :] = (y[i, j] / mag) * steering_interf[:, j].conj()
    return out


def l11_norm(A) -> float:
    return float(np.abs(A).sum())


def loss(A, bundle: CovarianceBundle, adc: AdcModel | None, params: DesignParams) -> float:
    return (
        ex_mse(A, bundle, adc)
        + params.int_rej_weight * int_rej(A, bundle.steering_interf)
        + params.sparsity_weight * l11_norm(A)
    )


def soft_threshold(Z, lam: float) -> np.ndarray:
    """Complex soft threshold: shrink moduli by ``lam``, keep phases."""
    if lam < 0:
        raise ValueError("threshold must be nonnegative")
    Z = np.asarray(Z, dtype=complex)
    mag = np.abs(Z)
    keep = mag > lam
    scale = np.zeros_like(mag)
    np.divide(lam, mag, out=scale, where=keep)
    scale = np.where(keep, 1.0 - scale, 0.0)
    return Z * scale


def proximal_step(A, bundle: CovarianceBundle, adc: AdcModel | None, params: DesignParams) -> np.ndarray:
    mu = params.step_size
    grad = ex_mse_grad(A, bundle, adc)
    if params.int_rej_weight:
        grad = grad + params.int_rej_weight * int_rej_subgradient(A, bundle.steering_interf)
    return soft_threshold(A - mu * grad, mu * params.sparsity_weight)


_NEIGHBOURS = [(dg, dh) for dg in (-1, 0, 1) for dh in (-1, 0, 1) if dg or dh]


def refine_on_grid(codes, constellation, objective, max_passes: int = 50):
    """Greedy search over neighbouring VM settings.

    Each active entry may move one code step in I and/or Q; moves are kept
    when they lower ``objective(A)``. Deactivated entries stay off and active
    ones are never switched off, so the sparsity pattern is preserved.

    Returns
    -------
    (g, h) : tuple of int arrays
        Refined codes.
    value : float
        Objective at the refined combiner.
    """
    g, h = (np.array(c, dtype=int) for c in codes)
    half = constellation.ideal.half if isinstance(constellation, MismatchedConstellation) else constellation.half
    best = objective(constellation.realize(g, h))
    for _ in range(max_passes):
        improved = False
        for idx in np.ndindex(g.shape):
            if g[idx] == 0 and h[idx] == 0:
                continue
            g0, h0 = g[idx], h[idx]
            for dg, dh in _NEIGHBOURS:
                gn, hn = g0 + dg, h0 + dh
                if abs(gn) > half or abs(hn) > half or (gn == 0 and hn == 0):
                    continue
                g[idx], h[idx] = gn, hn
                value = objective(constellation.realize(g, h))
                if value < best:
                    best, g0, h0, improved = value, gn, hn, True
                else:
                    g[idx], h[idx] = g0, h0
            g[idx], h[idx] = g0, h0
        if not improved:
            break
    return (g, h), best


def _run(bundle, adc, params, initial):
    """One pass of the projected proximal iteration."""
    constellation = params.constellation()
    A = np.array(bundle.gamma if initial is None else initial, dtype=complex)
    if A.any():
        # ex_mse is scale invariant; start inside the constellation's box
        A = A / unit_box_scale(A)

    trace = []
    best = None  # (loss, codes)
    for k in range(1, params.max_iters + 1):
        A = proximal_step(A, bundle, adc, params)
        value = loss(A, bundle, adc, params)
        if not math.isfinite(value):
            raise DesignError(f"non-finite loss at iteration {k}", trace)
        if constellation is not None and (k % params.project_every == 0 or k == params.max_iters):
            codes = constellation.project_codes(A / unit_box_scale(A))
            A = constellation.realize(*codes)
            value = loss(A, bundle, adc, params)
            if best is None or value < best[0]:
                best = (value, codes)
        trace.append(value)

    codes = None
    if constellation is not None:
        codes = best[1]
        if params.refine:
            codes, _ = refine_on_grid(codes, constellation, lambda M: loss(M, bundle, adc, params))
        A = constellation.realize(*codes)
    return _result(A, codes, trace, bundle, adc, params)


def _result(A, codes, trace, bundle, adc, params):
    return DesignResult(
        combiner=A,
        digital_filter=digital_filter(A, bundle, adc),
        loss_trace=list(trace),
        final_ex_mse=ex_mse(A, bundle, adc),
        final_int_rej=int_rej(A, bundle.steering_interf),
        achieved_sparsity=sparsity_fraction(A),
        codes=codes,
        metadata={
            "sparsity_weight": params.sparsity_weight,
            "int_rej_weight": params.int_rej_weight,
            "final_loss": loss(A, bundle, adc, params),
        },
    )


def _task_objective(bundle, adc, params):
    """Loss without the sparsity term, used to compare equally sparse designs."""
    return lambda M: ex_mse(M, bundle, adc) + params.int_rej_weight * int_rej(M, bundle.steering_interf)


def prune_codes(codes, constellation, n_off, objective):
    """Switch off VMs one at a time until ``n_off`` are inactive.

    Each round removes the entry whose deactivation hurts ``objective`` least
    and then re-runs :func:`refine_on_grid` on the remaining support.
    """
    g, h = (np.array(c, dtype=int) for c in codes)
    while np.count_nonzero((g == 0) & (h == 0)) < n_off:
        best = None
        for idx in zip(*np.nonzero((g != 0) | (h != 0))):
            saved = g[idx], h[idx]
            g[idx] = h[idx] = 0
            value = objective(constellation.realize(g, h))
            if best is None or value < best[0]:
                best = (value, idx)
            g[idx], h[idx] = saved
        g[best[1]] = h[best[1]] = 0
        (g, h), _ = refine_on_grid((g, h), constellation, objective)
    return g, h


def _tune_sparsity(bundle, adc, params, initial, band=0.10, max_probes=20):
    """Meet ``params.target_sparsity``.

    The sparsity weight is bisected on a log scale; after projection the
    achieved sparsity is not monotone in the weight, so with a constellation
    the dense design pruned by :func:`prune_codes` is added as a candidate and
    the best design with exactly the target number of inactive VMs wins.
    Without a constellation the closest probe in ``[target, target + band]``
    is returned.
    """
    target = params.target_sparsity
    constellation = params.constellation()
    size = bundle.gamma.shape[0] * bundle.n_antennas
    n_off = math.ceil(target * size - 1e-9)
    objective = _task_objective(bundle, adc, params)

    lo, hi = math.log(1e-6), math.log(1e2)
    probes = []
    for _ in range(max_probes):
        weight = math.exp(0.5 * (lo + hi))
        res = _run(bundle, adc, replace(params, sparsity_weight=weight, target_sparsity=None), initial)
        probes.append((weight, res))
        log.debug("sparsity probe weight=%.3g sparsity=%.3f", weight, res.achieved_sparsity)
        if abs(res.achieved_sparsity - target) < 1e-9:
            break
        if res.achieved_sparsity < target:
            lo = math.log(weight)
        else:
            hi = math.log(weight)

    exact = [r for _, r in probes if np.count_nonzero(r.combiner == 0) == n_off]
    if constellation is not None:
        dense = _run(bundle, adc, replace(params, sparsity_weight=0.0, target_sparsity=None), initial)
        codes = prune_codes(dense.codes, constellation, n_off, objective)
        pruned = _result(constellation.realize(*codes), codes, dense.loss_trace, bundle, adc, params)
        pruned.metadata["pruned"] = True
        exact.append(pruned)

    if exact:
        res = min(exact, key=lambda r: objective(r.combiner))
    else:
        in_band = [r for _, r in probes if target <= r.achieved_sparsity <= target + band]
        above = [r for _, r in probes if r.achieved_sparsity >= target]
        if in_band:
            res = min(in_band, key=lambda r: r.achieved_sparsity)
        else:
            res = min(above, key=lambda r: r.achieved_sparsity) if above else max((r for _, r in probes), key=lambda r: r.achieved_sparsity)
            log.warning("sparsity target %.2f not met; using %.3f", target, res.achieved_sparsity)
    res.metadata["target_sparsity"] = target
    res.metadata["sparsity_probes"] = [[w, r.achieved_sparsity] for w, r in probes]
    return res


def algorithm1(bundle: CovarianceBundle, adc: AdcModel | None, params: DesignParams | None = None, initial=None) -> DesignResult:
    """Design the analog combiner and digital filter for known AoAs.

    Parameters
    ----------
    bundle : CovarianceBundle
        Statistics at the (assumed exact) AoAs.
    adc : AdcModel or None
        Converter model; ``None`` designs for unquantized acquisition.
    params : DesignParams, optional
    initial : ndarray, optional
        Starting combiner; defaults to the LMMSE matrix ``Gamma``.

    Returns
    -------
    DesignResult
        The best projected iterate (after neighbour refinement) when a
        constellation is in force, else the final iterate.
    """
    params = params or DesignParams()
    if params.target_sparsity is not None and params.target_sparsity > 0:
        result = _tune_sparsity(bundle, adc, params, initial)
    else:
        result = _run(bundle, adc, params, initial)
    if params.mismatch is not None:
        result = _ideal_start_candidate(result, bundle, adc, params, initial)
    return result


def _ideal_start_candidate(result, bundle, adc, params, initial):
    """Also try the mismatch-free design's codes, refined on the corrupted sets.

    Keeps whichever of the two has the lower loss without the sparsity term
    (both have the same number of inactive VMs when a target is set).
    """
    constellation = params.mismatch
    ideal = algorithm1(bundle, adc, replace(params, mismatch=None), initial)
    objective = _task_objective(bundle, adc, params)
    codes, _ = refine_on_grid(ideal.codes, constellation, objective)
    A = constellation.realize(*codes)
    if objective(A) < objective(result.combiner):
        metadata = dict(result.metadata, ideal_start=True)
        result = _result(A, codes, result.loss_trace, bundle, adc, params)
        result.metadata.update(metadata)
    return result
