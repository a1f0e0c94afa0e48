"""Discrete gain sets realisable by Cartesian vector modulators.

Every constellation is indexed by integer I/Q codes ``(g, h)`` with
``|g|, |h| <= 2**(r-1)``; the ideal point for a code is
``(g + j h) * 2 / 2**r``. Hardware mismatch changes the complex value a
code produces but not the code set, which lets design routines move between
neighbouring settings regardless of the distortion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from taskbeam._toml import load_toml

__all__ = [
    "IdealConstellation",
    "MismatchParams",
    "MismatchedConstellation",
    "build_ideal",
    "build_mismatched",
    "project_ideal",
    "project_mismatched",
    "sparsity_fraction",
    "unit_box_scale",
    "load_mismatch",
]


def unit_box_scale(A) -> float:
    """Largest |Re| or |Im| over all entries (1.0 for an all-zero matrix)."""
    A = np.asarray(A)
    m = max(np.abs(A.real).max(initial=0.0), np.abs(A.imag).max(initial=0.0))
    return float(m) if m > 0 else 1.0


def _round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


@dataclass(frozen=True)
class IdealConstellation:
    resolution_bits: int

    def __post_init__(self):
        if self.resolution_bits < 1:
            raise ValueError("resolution_bits must be >= 1")

    @property
    def half(self) -> int:
        return 2 ** (self.resolution_bits - 1)

    @property
    def step(self) -> float:
        return 2.0 / 2**self.resolution_bits

    @cached_property
    def axis(self) -> np.ndarray:
        return np.arange(-self.half, self.half + 1) * self.step

    @cached_property
    def points(self) -> np.ndarray:
        return (self.axis[:, None] + 1j * self.axis[None, :]).ravel()

    def __contains__(self, value) -> bool:
        return bool(np.any(np.abs(self.points - value) < 1e-12))

    def project_codes(self, matrix):
        """Nearest codes per axis, saturating outside the unit square."""
        matrix = np.asarray(matrix, dtype=complex)
        g = np.clip(_round_half_away(matrix.real / self.step), -self.half, self.half).astype(int)
        h = np.clip(_round_half_away(matrix.imag / self.step), -self.half, self.half).astype(int)
        return g, h

    def realize(self, g, h) -> np.ndarray:
        return (np.asarray(g) + 1j * np.asarray(h)) * self.step

    def codes_of(self, matrix):
        """Codes of a matrix whose entries already lie in the set."""
        return self.project_codes(matrix)


@dataclass(frozen=True)
class MismatchParams:
    """Per-VM I/Q and output gain/phase errors (phases in radians).

    Every field is a P x N array; scalars are broadcast by :meth:`broadcast`.
    """

    i_gain: np.ndarray
    i_phase: np.ndarray
    q_gain: np.ndarray
    q_phase: np.ndarray
    out_gain: np.ndarray
    out_phase: np.ndarray

    FIELDS = ("i_gain", "i_phase", "q_gain", "q_phase", "out_gain", "out_phase")

    def __post_init__(self):
        arrays = [np.asarray(getattr(self, f), dtype=float) for f in self.FIELDS]
        shape = np.broadcast_shapes(*(a.shape for a in arrays))
        for f, a in zip(self.FIELDS, arrays):
            object.__setattr__(self, f, np.broadcast_to(a, shape).copy())
        for f in ("i_gain", "q_gain", "out_gain"):
            if np.any(getattr(self, f) <= -1):
                raise ValueError(f"{f} must stay above -1")

    @classmethod
    def broadcast(cls, shape, **values) -> "MismatchParams":
        return cls(**{f: np.full(shape, float(values.get(f, 0.0))) for f in cls.FIELDS})

    @classmethod
    def zero(cls, shape) -> "MismatchParams":
        return cls.broadcast(shape)

    @property
    def shape(self):
        return self.i_gain.shape

    def i_response(self) -> np.ndarray:
        """Complex gain applied to the in-phase code, per entry."""
        return (1 + self.i_gain) * (1 + self.out_gain) * np.exp(1j * (self.i_phase + self.out_phase))

    def q_response(self) -> np.ndarray:
        """Complex gain applied to the quadrature code, per entry."""
        return (1 + self.q_gain) * (1 + self.out_gain) * 1j * np.exp(1j * (self.q_phase + self.out_phase))


@dataclass(frozen=True)
class MismatchedConstellation:
    """Per-entry corrupted sets; ``sets[p, n]`` lists every realisable gain."""

    ideal: IdealConstellation
    params: MismatchParams
    i_resp: np.ndarray = field(init=False, repr=False)
    q_resp: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "i_resp", self.params.i_response())
        object.__setattr__(self, "q_resp", self.params.q_response())

    @property
    def shape(self):
        return self.params.shape

    @property
    def resolution_bits(self) -> int:
        return self.ideal.resolution_bits

    @cached_property
    def sets(self) -> np.ndarray:
        pts = self.ideal.points
        return self.i_resp[..., None] * pts.real + self.q_resp[..., None] * pts.imag

    def realize(self, g, h) -> np.ndarray:
        step = self.ideal.step
        return self.i_resp * (np.asarray(g) * step) + self.q_resp * (np.asarray(h) * step)

    def project_codes(self, matrix):
        """Exhaustive nearest-point search per entry.

        Ties go to the point of smallest modulus, then smallest phase.
        """
        matrix = np.asarray(matrix, dtype=complex)
        if matrix.shape != self.shape:
            raise ValueError(f"matrix shape {matrix.shape} does not match sets {self.shape}")
        sets = self.sets
        n_axis = len(self.ideal.axis)
        dist = np.abs(matrix[..., None] - sets)
        best = dist.argmin(axis=-1)
        dmin = np.take_along_axis(dist, best[..., None], axis=-1)
        ties = dist <= dmin * (1 + 1e-12) + 1e-15
        for idx in zip(*np.nonzero(ties.sum(axis=-1) > 1)):
            cand = np.flatnonzero(ties[idx])
            pts = sets[idx][cand]
            order = np.lexsort((np.angle(pts), np.round(np.abs(pts), 12)))
            best[idx] = cand[order[0]]
        g, h = np.divmod(best, n_axis)
        return g - self.ideal.half, h - self.ideal.half

    def codes_of(self, matrix):
        return self.project_codes(matrix)


def build_ideal(resolution_bits: int) -> IdealConstellation:
    return IdealConstellation(int(resolution_bits))


def build_mismatched(ideal: IdealConstellation, params: MismatchParams) -> MismatchedConstellation:
    return MismatchedConstellation(ideal, params)


def project_ideal(matrix, resolution_bits: int) -> np.ndarray:
    """Quantize Re and Im independently onto the r-bit VM grid."""
    c = build_ideal(resolution_bits)
    return c.realize(*c.project_codes(matrix))


def project_mismatched(matrix, sets: MismatchedConstellation) -> np.ndarray:
    """Entry-wise nearest point in the corrupted sets."""
    return sets.realize(*sets.project_codes(matrix))


def sparsity_fraction(matrix) -> float:
    """Fraction of exactly-zero entries (deactivated VMs)."""
    matrix = np.asarray(matrix)
    if matrix.size == 0:
        return 0.0
    return float(np.mean(matrix == 0))


_FILE_KEYS = {
    "i_gain": 1.0,
    "q_gain": 1.0,
    "out_gain": 1.0,
    "i_phase_deg": np.pi / 180,
    "q_phase_deg": np.pi / 180,
    "out_phase_deg": np.pi / 180,
}


def mismatch_from_dict(data: dict, shape) -> MismatchParams:
    """Parse a mismatch table; each key holds a scalar or a P x N nested list."""
    unknown = set(data) - set(_FILE_KEYS) - {"spread", "n_draws"}
    if unknown:
        raise ValueError(f"unknown mismatch keys: {sorted(unknown)}")
    values = {}
    for key, scale in _FILE_KEYS.items():
        arr = np.asarray(data.get(key, 0.0), dtype=float) * scale
        if arr.ndim not in (0, 2) or (arr.ndim == 2 and arr.shape != tuple(shape)):
            raise ValueError(f"{key}: expected a scalar or a {shape[0]}x{shape[1]} table")
        values[key.replace("_deg", "")] = np.broadcast_to(arr, shape)
    return MismatchParams(**values)


def load_mismatch(path, shape) -> MismatchParams:
    """Read mismatch parameters from a TOML file (optionally under ``[mismatch]``)."""
    data = load_toml(Path(path))
    return mismatch_from_dict(data.get("mismatch", data), shape)
