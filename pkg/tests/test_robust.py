import math

import numpy as np
import pytest

import oracles
from conftest import random_combiner
from taskbeam.constellation import build_ideal
from taskbeam.design import algorithm1, digital_filter, ex_mse
from taskbeam.robust import (
    RobustParams,
    RobustProblem,
    UncertaintyModel,
    algorithm2,
    aoa_grid,
    barrier,
    draw_angles,
    mse_full,
    step_combiner,
    step_filter,
    worst_case_mse,
)
from taskbeam.scenario import build_covariances, mmse_floor


def model(scenario, eps_deg, grid=3):
    return UncertaintyModel(scenario.desired_angles, math.radians(eps_deg), grid)


def test_grid_examples(scenario):
    assert aoa_grid(model(scenario, 0)).shape == (1, 2)
    g = aoa_grid(model(scenario, 5))
    assert g.shape == (9, 2)
    assert np.allclose(np.abs(g - scenario.desired_angles).max(), math.radians(5))
    assert any(np.allclose(row, scenario.desired_angles) for row in g)
    assert aoa_grid(model(scenario, 5, grid=5)).shape == (25, 2)


def test_draws_inside_box(scenario):
    m = model(scenario, 4)
    draws = draw_angles(m, 500, seed=1)
    assert all(m.contains(d) for d in draws)
    np.testing.assert_array_equal(draws, draw_angles(m, 500, seed=1))
    assert not m.contains(np.asarray(scenario.desired_angles) + math.radians(5))


def test_uncertainty_validation():
    with pytest.raises(ValueError):
        UncertaintyModel((0.1,), -0.1)
    with pytest.raises(ValueError):
        UncertaintyModel((0.1,), 0.1, grid_per_axis=0)


def test_mse_full_zero_filter_is_signal_power(scenario, rng, adc16):
    A = random_combiner(rng)
    B = np.zeros((2, 2), dtype=complex)
    assert mse_full(A, B, scenario.desired_angles, scenario, adc16) == pytest.approx(2.0)


def test_mse_full_matches_oracle(scenario, bundle, rng, adc16):
    A, B = random_combiner(rng), random_combiner(rng, (2, 2))
    cs = np.diag(scenario.desired_variances).astype(complex)
    want = oracles.mse_full(A, B, cs, bundle.cov_x, bundle.cross_sx)
    assert mse_full(A, B, scenario.desired_angles, scenario, adc16) == pytest.approx(want, rel=1e-10)


def test_mse_full_with_optimal_filter_matches_excess_form(scenario, bundle, rng, adc16):
    A = random_combiner(rng)
    B = digital_filter(A, bundle, adc16)
    want = mmse_floor(bundle) + ex_mse(A, bundle, adc16)
    assert mse_full(A, B, scenario.desired_angles, scenario, adc16) == pytest.approx(want, rel=1e-9)


def test_mse_full_at_shifted_angles(scenario, rng, adc16):
    A, B = random_combiner(rng), random_combiner(rng, (2, 2))
    angles = np.asarray(scenario.desired_angles) + 0.03
    shifted = build_covariances(scenario.with_angles(angles))
    cs = np.diag(scenario.desired_variances).astype(complex)
    want = oracles.mse_full(A, B, cs, shifted.cov_x, shifted.cross_sx)
    assert mse_full(A, B, angles, scenario, adc16) == pytest.approx(want, rel=1e-10)


@pytest.fixture
def problem(scenario, adc16):
    return RobustProblem(scenario, aoa_grid(model(scenario, 3)), adc16)


def test_vectorised_mse_matches_per_point(problem, scenario, rng, adc16):
    A, B = random_combiner(rng), random_combiner(rng, (2, 2))
    per_point = [mse_full(A, B, t, scenario, adc16) for t in problem.angle_sets]
    np.testing.assert_allclose(problem.mse(A, B), per_point, rtol=1e-12)


def test_gradients_match_finite_differences(problem, rng):
    A, B = random_combiner(rng), random_combiner(rng, (2, 2))
    w = rng.uniform(0.1, 1.0, len(problem))
    fa = oracles.fd_gradient(lambda M: float(w @ problem.mse(M, B)), A)
    fb = oracles.fd_gradient(lambda M: float(w @ problem.mse(A, M)), B)
    scale_a, scale_b = max(1, np.abs(fa).max()), max(1, np.abs(fb).max())
    assert np.abs(problem.grad_a(A, B, w) - fa).max() <= 1e-5 * scale_a
    assert np.abs(problem.grad_b(A, B, w) - fb).max() <= 1e-5 * scale_b


def test_barrier_properties(problem, rng):
    params = RobustParams()
    A, B = random_combiner(rng), random_combiner(rng, (2, 2))
    worst = problem.mse(A, B).max()
    assert barrier(A, worst, B, problem, params) == math.inf
    assert barrier(A, worst - 1, B, problem, params) == math.inf
    f1 = barrier(A, worst + 1.0, B, problem, params)
    assert math.isfinite(f1)
    # with all gaps above one the log terms are negative contributions
    assert f1 < worst + 1.0 + problem.penalties(A, params)
    w = problem.barrier_weights(A, worst + 1.0, B, params)
    assert np.all(w > 0)


def test_barrier_steps_do_not_increase(problem, rng):
    params = RobustParams()
    A, B = random_combiner(rng), random_combiner(rng, (2, 2))
    gamma = problem.mse(A, B).max() + 1.0
    f0 = barrier(A, gamma, B, problem, params)
    A1, g1, _ = step_combiner(A, gamma, B, problem, params)
    f1 = barrier(A1, g1, B, problem, params)
    B2, g2, _ = step_filter(A1, g1, B, problem, params)
    f2 = barrier(A1, g2, B2, problem, params)
    assert f1 <= f0 and f2 <= f1
    assert np.all(problem.mse(A1, B2) < g2)


@pytest.fixture(scope="module")
def designs(scenario, adc16):
    out = {}
    for eps in (0, 2, 5):
        out[eps] = algorithm2(scenario, adc16, model(scenario, eps))
    out["nonrobust"] = algorithm1(build_covariances(scenario), adc16)
    return out


def test_robust_result_on_constellation(designs):
    res = designs[5]
    c = build_ideal(4)
    assert all(v in c for v in res.combiner.ravel())
    assert res.metadata["grid_points"] == 9
    assert all(math.isfinite(v) for v in res.loss_trace)


def test_zero_margin_close_to_known_aoa_design(designs, scenario, bundle, adc16):
    nominal = designs["nonrobust"]
    known = mmse_floor(bundle) + nominal.final_ex_mse
    robust = designs[0].metadata["nominal_mse"]
    assert abs(robust - known) <= 0.05 * known


@pytest.mark.parametrize("eps", [2, 5])
def test_worst_case_dominance(designs, scenario, adc16, eps):
    m = model(scenario, eps)
    rob = designs[eps]
    non = designs["nonrobust"]
    w_rob, _ = worst_case_mse(rob.combiner, rob.digital_filter, scenario, adc16, m, 200, seed=11)
    w_non, _ = worst_case_mse(non.combiner, non.digital_filter, scenario, adc16, m, 200, seed=11)
    assert w_rob <= w_non


def test_grid_size_insensitivity(designs, scenario, adc16):
    fine = algorithm2(scenario, adc16, model(scenario, 5, grid=5))
    m = model(scenario, 5)
    w3, _ = worst_case_mse(designs[5].combiner, designs[5].digital_filter, scenario, adc16, m, 200, seed=3)
    w5, _ = worst_case_mse(fine.combiner, fine.digital_filter, scenario, adc16, m, 200, seed=3)
    assert abs(w3 - w5) <= 0.10 * min(w3, w5)


def test_worst_case_reports_max(scenario, adc16, rng):
    A, B = random_combiner(rng), random_combiner(rng, (2, 2))
    worst, values = worst_case_mse(A, B, scenario, adc16, model(scenario, 3), 50, seed=0)
    assert values.shape == (50,) and worst == values.max()


def test_robust_params_validation():
    with pytest.raises(ValueError):
        RobustParams(barrier_weight=0)
    with pytest.raises(ValueError):
        RobustParams(inner_iters=0)
