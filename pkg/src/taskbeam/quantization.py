"""Uniform mid-tread ADCs with non-subtractive dither.

Every ADC in the receiver shares one dynamic range, set from the average
per-real-component power at the analog combiner output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "AdcModel",
    "kappa",
    "noise_factor",
    "total_bits",
    "levels_for_budget",
    "component_power",
    "dynamic_range",
    "midtread_quantize",
    "adc_convert",
]


@dataclass(frozen=True)
class AdcModel:
    """Identical b-level converters on the I and Q branch of every chain.

    ``loading_factor`` is the ratio of dynamic range to the input standard
    deviation.
    """

    levels: int
    loading_factor: float = 3.0
    dithered: bool = True

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 2:
            raise ValueError(f"levels must be an integer >= 2, got {self.levels}")
        if not self.loading_factor > 0:
            raise ValueError("loading_factor must be positive")
        if self.loading_factor**2 / (3 * self.levels**2) >= 1:
            raise ValueError("loading_factor too large for this level count (kappa undefined)")
        object.__setattr__(self, "levels", int(self.levels))

    @property
    def bits(self) -> int:
        return math.ceil(math.log2(self.levels))


def kappa(adc: AdcModel) -> float:
    """Overload-corrected constant ``eta^2 / (1 - eta^2 / (3 b^2))``."""
    eta2 = adc.loading_factor**2
    ratio = eta2 / (3.0 * float(adc.levels) ** 2)
    if ratio >= 1:
        raise ValueError("eta^2 / (3 b^2) must be < 1")
    return eta2 / (1.0 - ratio)


def noise_factor(adc: AdcModel | None, n_chains: int) -> float:
    """Scale ``c`` such that the per-chain quantization noise is ``c * Tr(A C_x A^H)``.

    ``adc=None`` stands for ideal (unquantized) acquisition.
    """
    if adc is None:
        return 0.0
    return 2.0 * kappa(adc) / (3.0 * float(adc.levels) ** 2 * n_chains)


def total_bits(n_chains: int, levels: int) -> int:
    """Bits per snapshot over all ``2 P`` converters."""
    if levels < 2:
        raise ValueError("levels must be >= 2")
    return 2 * n_chains * math.ceil(math.log2(levels))


def levels_for_budget(budget_bits: int, n_chains: int) -> int:
    """Largest power-of-two level count whose ``2 P`` ADCs fit in the budget."""
    per_adc = budget_bits // (2 * n_chains)
    if per_adc < 1:
        raise ValueError(f"{budget_bits} bits cannot feed {2 * n_chains} converters")
    return 2**per_adc


def component_power(A: np.ndarray, cov_x: np.ndarray) -> float:
    """Average power of one real ADC input, ``Tr(A C_x A^H) / (2P)``."""
    return float(np.trace(A @ cov_x @ A.conj().T).real / (2 * A.shape[0]))


def dynamic_range(adc: AdcModel, avg_component_power: float) -> float:
    if not avg_component_power > 0:
        raise ValueError("avg_component_power must be positive")
    return adc.loading_factor * math.sqrt(avg_component_power)


def _round_half_away(x):
    return np.sign(x) * np.floor(np.abs(x) + 0.5)


def midtread_quantize(value, levels: int, dynamic_range: float):
    """Quantize real values onto the mid-tread grid ``k * 2 gamma / b``.

    Indices are limited to ``|k| <= (b - 1) // 2`` so the grid is symmetric
    about zero and never has more than ``b`` points; values beyond it
    saturate at the outermost level.
    """
    if levels < 2:
        raise ValueError("levels must be >= 2")
    step = 2.0 * dynamic_range / levels
    top = (levels - 1) // 2
    k = np.clip(_round_half_away(np.asarray(value, dtype=float) / step), -top, top)
    out = k * step
    return float(out) if np.ndim(out) == 0 else out


def adc_convert(z, adc: AdcModel, dynamic_range: float, seed=None):
    """Digitise complex chain outputs; I and Q go through separate converters.

    With ``adc.dithered`` a uniform dither on ``[-step/2, step/2]`` is added to
    every real component and left in the output.
    """
    z = np.asarray(z, dtype=complex)
    re, im = z.real, z.imag
    if adc.dithered:
        rng = np.random.default_rng(seed)
        step = 2.0 * dynamic_range / adc.levels
        re = re + rng.uniform(-step / 2, step / 2, size=z.shape)
        im = im + rng.uniform(-step / 2, step / 2, size=z.shape)
    return midtread_quantize(re, adc.levels, dynamic_range) + 1j * midtread_quantize(im, adc.levels, dynamic_range)
