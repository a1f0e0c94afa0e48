"""Narrowband far-field signal model for a uniform linear array.

All covariance quantities consumed by the design and evaluation code are
built here from a :class:`Scenario`.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from taskbeam._toml import load_toml

__all__ = [
    "Scenario",
    "CovarianceBundle",
    "CovarianceError",
    "steering_vector",
    "steering_matrix",
    "build_covariances",
    "mmse_floor",
    "sample_received",
    "snr_to_noise",
    "scenario_from_dict",
    "load_scenario",
    "reference_scenario",
    "second_setup",
]


class CovarianceError(RuntimeError):
    """Raised when the received covariance cannot be factorised."""


def _as_angles(values) -> tuple:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))


@dataclass(frozen=True)
class Scenario:
    """Array geometry, source/interferer directions and powers, noise level.

    Angles are in radians measured from broadside. ``desired_cov`` and
    ``interferer_cov`` optionally replace the diagonal covariances implied by
    the variance lists (the variance lists must then equal their diagonals).
    """

    n_antennas: int
    n_chains: int
    desired_angles: tuple
    desired_variances: tuple
    interferer_angles: tuple = ()
    interferer_variances: tuple = ()
    noise_variance: float = 1.0
    spacing_ratio: float = 0.5
    desired_cov: np.ndarray | None = field(default=None, compare=False, repr=False)
    interferer_cov: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)
        set_("desired_angles", _as_angles(self.desired_angles))
        set_("desired_variances", _as_angles(self.desired_variances))
        set_("interferer_angles", _as_angles(self.interferer_angles) if len(self.interferer_angles) else ())
        set_("interferer_variances", _as_angles(self.interferer_variances) if len(self.interferer_variances) else ())

        if self.n_antennas < 1 or self.n_chains < 1:
            raise ValueError("n_antennas and n_chains must be positive")
        if self.n_chains > self.n_antennas:
            raise ValueError(f"n_chains={self.n_chains} exceeds n_antennas={self.n_antennas}")
        if len(self.desired_angles) < 1 or len(self.desired_angles) != len(self.desired_variances):
            raise ValueError("need K >= 1 desired angles with one variance each")
        if len(self.interferer_angles) != len(self.interferer_variances):
            raise ValueError("interferer angles and variances differ in length")
        if min(self.desired_variances) <= 0 or (self.interferer_variances and min(self.interferer_variances) <= 0):
            raise ValueError("source variances must be positive")
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be positive")
        if not self.spacing_ratio > 0:
            raise ValueError("spacing_ratio must be positive")
        for a in self.desired_angles + self.interferer_angles:
            if not -np.pi / 2 < a < np.pi / 2:
                raise ValueError(f"angle {a} rad outside (-pi/2, pi/2)")

        for name, var in (("desired_cov", self.desired_variances), ("interferer_cov", self.interferer_variances)):
            cov = getattr(self, name)
            if cov is None:
                continue
            cov = np.asarray(cov, dtype=complex)
            if cov.shape != (len(var), len(var)):
                raise ValueError(f"{name} must be {len(var)}x{len(var)}")
            if not np.allclose(cov, cov.conj().T):
                raise ValueError(f"{name} must be Hermitian")
            if not np.allclose(np.diag(cov).real, var):
                raise ValueError(f"diagonal of {name} must match the variance list")
            set_(name, cov)

    @property
    def n_desired(self) -> int:
        return len(self.desired_angles)

    @property
    def n_interferers(self) -> int:
        return len(self.interferer_angles)

    @property
    def cov_s(self) -> np.ndarray:
        if self.desired_cov is not None:
            return self.desired_cov
        return np.diag(np.asarray(self.desired_variances, dtype=complex))

    @property
    def cov_v(self) -> np.ndarray:
        if self.interferer_cov is not None:
            return self.interferer_cov
        return np.diag(np.asarray(self.interferer_variances, dtype=complex))

    def with_angles(self, angles) -> "Scenario":
        """Copy with the desired AoAs replaced (interferers unchanged)."""
        return dataclasses.replace(self, desired_angles=_as_angles(angles))

    def with_snr(self, snr_db: float) -> "Scenario":
        return dataclasses.replace(self, noise_variance=snr_to_noise(self.desired_variances, snr_db))

    @property
    def snr_db(self) -> float:
        return float(10 * np.log10(np.mean(self.desired_variances) / self.noise_variance))


@dataclass(frozen=True)
class CovarianceBundle:
    """Second-order statistics of the received signal and the task vector."""

    cov_x: np.ndarray
    cross_sx: np.ndarray
    gamma: np.ndarray
    steering_desired: np.ndarray
    steering_interf: np.ndarray
    cov_s: np.ndarray

    @property
    def n_antennas(self) -> int:
        return self.cov_x.shape[0]


def steering_vector(angle: float, n_antennas: int, spacing_ratio: float = 0.5, index_offset: int = 0) -> np.ndarray:
    """ULA response ``exp(-j 2 pi n (d/lambda) sin(angle))`` for n = 0..N-1.

    ``index_offset`` shifts the antenna index base (n -> n + offset); it only
    multiplies the vector by a unit-modulus scalar.
    """
    if n_antennas < 1:
        raise ValueError("n_antennas must be >= 1")
    n = np.arange(n_antennas) + index_offset
    return np.exp(-2j * np.pi * n * spacing_ratio * np.sin(angle))


def steering_matrix(angles, n_antennas: int, spacing_ratio: float = 0.5, index_offset: int = 0) -> np.ndarray:
    """Stack steering vectors column-wise into an N x len(angles) matrix."""
    angles = np.atleast_1d(np.asarray(angles, dtype=float))
    n = (np.arange(n_antennas) + index_offset)[:, None]
    return np.exp(-2j * np.pi * n * spacing_ratio * np.sin(angles)[None, :])


def build_covariances(scenario: Scenario, index_offset: int = 0) -> CovarianceBundle:
    """Received covariance, task cross-covariance and the LMMSE matrix."""
    N = scenario.n_antennas
    m_theta = steering_matrix(scenario.desired_angles, N, scenario.spacing_ratio, index_offset)
    m_phi = steering_matrix(scenario.interferer_angles, N, scenario.spacing_ratio, index_offset)
    cov_s = scenario.cov_s

    cov_x = m_theta @ cov_s @ m_theta.conj().T + scenario.noise_variance * np.eye(N)
    if scenario.n_interferers:
        cov_x = cov_x + m_phi @ scenario.cov_v @ m_phi.conj().T
    # exact Hermitian symmetry regardless of rounding in the products
    cov_x = 0.5 * (cov_x + cov_x.conj().T)
    cross_sx = cov_s @ m_theta.conj().T

    tol = 1e-8 * np.trace(cov_x).real / N
    try:
        factor = scipy.linalg.cho_factor(cov_x, lower=True)
    except np.linalg.LinAlgError as exc:
        raise CovarianceError("received covariance is not positive definite") from exc
    if np.min(np.linalg.eigvalsh(cov_x)) < tol:
        raise CovarianceError("received covariance is numerically singular")
    gamma = scipy.linalg.cho_solve(factor, cross_sx.conj().T).conj().T

    return CovarianceBundle(
        cov_x=cov_x,
        cross_sx=cross_sx,
        gamma=gamma,
        steering_desired=m_theta,
        steering_interf=m_phi,
        cov_s=cov_s,
    )


def mmse_floor(bundle: CovarianceBundle, scenario: Scenario | None = None) -> float:
    """Unquantized LMMSE error ``Tr(C_s) - Tr(Gamma C_x Gamma^H)``."""
    cov_s = bundle.cov_s if scenario is None else scenario.cov_s
    g = bundle.gamma
    return float(np.trace(cov_s).real - np.trace(g @ bundle.cov_x @ g.conj().T).real)


def _circular_normal(rng, cov, n):
    """Rows are CN(0, cov) draws; I and Q each carry half the variance."""
    k = cov.shape[0]
    w = (rng.standard_normal((n, k)) + 1j * rng.standard_normal((n, k))) / np.sqrt(2)
    if np.allclose(cov, np.diag(np.diag(cov))):
        return w * np.sqrt(np.diag(cov).real)
    chol = np.linalg.cholesky(cov)
    return w @ chol.T


def sample_received(scenario: Scenario, n_trials: int, seed=None):
    """Draw ``n_trials`` independent snapshots of the task vector and observation.

    Parameters
    ----------
    scenario : Scenario
    n_trials : int
        Number of snapshots, at least 1.
    seed : int, numpy.random.SeedSequence or numpy.random.Generator

    Returns
    -------
    s : ndarray, shape (n_trials, K)
    x : ndarray, shape (n_trials, N)
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    rng = np.random.default_rng(seed)
    N = scenario.n_antennas
    m_theta = steering_matrix(scenario.desired_angles, N, scenario.spacing_ratio)
    s = _circular_normal(rng, scenario.cov_s, n_trials)
    x = s @ m_theta.T
    if scenario.n_interferers:
        m_phi = steering_matrix(scenario.interferer_angles, N, scenario.spacing_ratio)
        v = _circular_normal(rng, scenario.cov_v, n_trials)
        x = x + v @ m_phi.T
    x = x + _circular_normal(rng, scenario.noise_variance * np.eye(N), n_trials)
    return s, x


def snr_to_noise(desired_variances, snr_db: float) -> float:
    """Noise variance giving the requested average-source-power SNR."""
    variances = np.atleast_1d(np.asarray(desired_variances, dtype=float))
    if variances.size < 1:
        raise ValueError("need at least one desired variance")
    return float(np.mean(variances) / 10 ** (snr_db / 10))


_SCENARIO_KEYS = {
    "n_antennas",
    "n_chains",
    "desired_angles_deg",
    "desired_variances",
    "interferer_angles_deg",
    "interferer_variances",
    "snr_db",
    "spacing_ratio",
}


def scenario_from_dict(data: dict) -> Scenario:
    """Build a :class:`Scenario` from the flat key/value scenario format."""
    unknown = set(data) - _SCENARIO_KEYS
    if unknown:
        raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
    missing = {"n_antennas", "n_chains", "desired_angles_deg", "desired_variances"} - set(data)
    if missing:
        raise ValueError(f"missing scenario keys: {sorted(missing)}")
    variances = data["desired_variances"]
    return Scenario(
        n_antennas=int(data["n_antennas"]),
        n_chains=int(data["n_chains"]),
        desired_angles=np.deg2rad(data["desired_angles_deg"]),
        desired_variances=variances,
        interferer_angles=np.deg2rad(data.get("interferer_angles_deg", [])),
        interferer_variances=data.get("interferer_variances", []),
        noise_variance=snr_to_noise(variances, float(data.get("snr_db", 0.0))),
        spacing_ratio=float(data.get("spacing_ratio", 0.5)),
    )


def load_scenario(path) -> Scenario:
    """Read a scenario TOML file (keys as in :func:`scenario_from_dict`)."""
    data = load_toml(Path(path))
    return scenario_from_dict(data.get("scenario", data))


def reference_scenario(snr_db: float = 0.0) -> Scenario:
    """Two desired sources, two strong interferers, 8 antennas, 2 chains."""
    variances = (1.5, 0.5)
    return Scenario(
        n_antennas=8,
        n_chains=2,
        desired_angles=(np.pi / 8, -np.pi / 4),
        desired_variances=variances,
        interferer_angles=(-np.pi / 18, np.pi / 3),
        interferer_variances=(5.0, 5.0),
        noise_variance=snr_to_noise(variances, snr_db),
        spacing_ratio=0.5,
    )


def second_setup(snr_db: float = 0.0) -> Scenario:
    """Alternative geometry used for the second beam-pattern experiment."""
    return dataclasses.replace(
        reference_scenario(snr_db),
        desired_angles=(-np.pi / 8, 5 * np.pi / 18),
        interferer_angles=(-np.pi / 3, np.pi / 9),
    )
