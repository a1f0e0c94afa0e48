import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from taskbeam.quantization import (
    AdcModel,
    adc_convert,
    component_power,
    dynamic_range,
    kappa,
    levels_for_budget,
    midtread_quantize,
    noise_factor,
    total_bits,
)

levels = st.integers(2, 1024)
values = st.floats(-50, 50, allow_nan=False)
ranges = st.floats(0.01, 20)


def test_kappa_examples():
    assert kappa(AdcModel(10**9)) == pytest.approx(9.0, rel=1e-12)
    assert kappa(AdcModel(4)) == pytest.approx(432 / 39, rel=1e-12)
    assert kappa(AdcModel(2)) == pytest.approx(36.0)


def test_kappa_undefined_when_overloaded():
    with pytest.raises(ValueError):
        AdcModel(2, loading_factor=3.5)
    with pytest.raises(ValueError):
        AdcModel(1)


def test_noise_factor():
    adc = AdcModel(16)
    assert noise_factor(adc, 2) == pytest.approx(2 * kappa(adc) / (3 * 256 * 2))
    assert noise_factor(None, 2) == 0.0


def test_total_bits_examples():
    assert total_bits(2, 16) == 16
    assert total_bits(2, 2) == 4
    assert total_bits(4, 1024) == 80
    assert total_bits(2, 5) == 12  # ceil(log2 5) = 3
    with pytest.raises(ValueError):
        total_bits(2, 1)


def test_levels_for_budget():
    assert levels_for_budget(16, 2) == 16
    assert levels_for_budget(16, 8) == 2
    assert levels_for_budget(18, 2) == 16
    with pytest.raises(ValueError):
        levels_for_budget(8, 8)


def test_dynamic_range_examples():
    adc = AdcModel(16)
    assert dynamic_range(adc, 1.0) == pytest.approx(3.0)
    assert dynamic_range(adc, 4.0) == pytest.approx(6.0)
    with pytest.raises(ValueError):
        dynamic_range(adc, 0.0)


def test_dynamic_range_matches_pooled_component_std(scenario, bundle):
    from taskbeam.scenario import sample_received

    A = bundle.gamma
    _, x = sample_received(scenario, 100_000, seed=4)
    z = x @ A.T
    pooled = np.sqrt(np.mean(np.concatenate([z.real, z.imag]) ** 2))
    gamma = dynamic_range(AdcModel(16), component_power(A, bundle.cov_x))
    assert gamma == pytest.approx(3.0 * pooled, rel=0.02)


def test_midtread_examples():
    assert midtread_quantize(0.0, 16, 1.0) == 0.0
    assert midtread_quantize(0.3, 16, 1.0) == pytest.approx(0.25)
    top = midtread_quantize(5.0, 16, 1.0)
    assert top == pytest.approx(7 * 0.125)
    assert midtread_quantize(-5.0, 16, 1.0) == -top


def test_midtread_half_step_rounds_away_from_zero():
    assert midtread_quantize(0.0625, 16, 1.0) == pytest.approx(0.125)
    assert midtread_quantize(-0.0625, 16, 1.0) == pytest.approx(-0.125)


def test_midtread_odd_levels_reach_range():
    # b = 5: step 0.4, levels 0, +-0.4, +-0.8
    out = midtread_quantize(np.linspace(-3, 3, 601), 5, 1.0)
    np.testing.assert_allclose(np.unique(out), [-0.8, -0.4, 0.0, 0.4, 0.8], atol=1e-12)


@given(x=values, b=levels, g=ranges)
def test_midtread_odd_symmetry(x, b, g):
    assert midtread_quantize(-x, b, g) == -midtread_quantize(x, b, g)


@given(x=values, b=levels, g=ranges)
def test_midtread_idempotent(x, b, g):
    q = midtread_quantize(x, b, g)
    assert midtread_quantize(q, b, g) == pytest.approx(q, abs=1e-12)


@given(x=values, y=values, b=levels, g=ranges)
def test_midtread_monotone(x, y, b, g):
    lo, hi = min(x, y), max(x, y)
    assert midtread_quantize(lo, b, g) <= midtread_quantize(hi, b, g)


@given(b=st.integers(2, 64), g=ranges)
def test_midtread_at_most_b_levels(b, g):
    grid = np.linspace(-3 * g, 3 * g, 4001)
    assert len(np.unique(midtread_quantize(grid, b, g))) <= b


@given(x=values, b=levels, g=ranges)
def test_midtread_output_within_range(x, b, g):
    assert abs(midtread_quantize(x, b, g)) <= g + 1e-12


def test_adc_convert_zero_without_dither():
    adc = AdcModel(16, dithered=False)
    np.testing.assert_array_equal(adc_convert(np.zeros(4, dtype=complex), adc, 1.0, seed=0), np.zeros(4))


def test_adc_convert_deterministic():
    adc = AdcModel(16)
    z = np.linspace(-1, 1, 10) * (1 + 0.5j)
    np.testing.assert_array_equal(adc_convert(z, adc, 2.0, seed=7), adc_convert(z, adc, 2.0, seed=7))


def test_dithered_quantizer_unbiased():
    adc = AdcModel(16)
    z = np.full(100_000, 0.37 - 0.21j)
    out = adc_convert(z, adc, 1.0, seed=1)
    err = out - z
    for part in (err.real, err.imag):
        assert abs(part.mean()) < 3 * part.std() / np.sqrt(part.size)


def test_dithered_error_second_moment():
    adc = AdcModel(16)
    gamma = 1.0
    step = 2 * gamma / adc.levels
    rng = np.random.default_rng(2)
    z = rng.uniform(-0.6, 0.6, 1_000_000) + 1j * rng.uniform(-0.6, 0.6, 1_000_000)
    err = adc_convert(z, adc, gamma, seed=3) - z
    assert np.mean(err.real**2) == pytest.approx(step**2 / 6, rel=0.02)
    assert np.mean(err.imag**2) == pytest.approx(step**2 / 6, rel=0.02)


def test_dithered_error_uncorrelated_with_input():
    adc = AdcModel(16)
    rng = np.random.default_rng(8)
    x = rng.standard_normal(1_000_000) * 0.2
    err = adc_convert(x.astype(complex), adc, 1.0, seed=9).real - x
    corr = np.corrcoef(x, err)[0, 1]
    assert abs(corr) < 3 / np.sqrt(x.size)


def test_undithered_quantizer_error_is_deterministic_grid():
    adc = AdcModel(16, dithered=False)
    z = np.array([0.3 + 0.9j])
    np.testing.assert_allclose(adc_convert(z, adc, 1.0), [0.25 + 0.875j])
