import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robust_node.adversary import (
    AdversaryConfig,
    l2_norm_sq,
    linearized_robust_cost,
    residual,
    robust_cost,
    stationary_direction,
    worst_case_disturbance,
)
from robust_node.errors import ConfigError, LambdaTooSmallError
from robust_node.model import ModelConfig, predict, random_control
from robust_node.sensitivity import compute_L

from oracles import direct_gamma, memorizing_control, row_space_ascent

ADV = AdversaryConfig()


def _instance(seed, n_o=1, width=60):
    rng = np.random.default_rng(seed)
    L = rng.standard_normal((n_o, width)) * 0.05
    r = rng.standard_normal(n_o)
    lam = 1.1 * np.linalg.eigvalsh(L @ L.T)[-1] + rng.uniform(0, 0.5)
    return L, r, lam


def test_residual_examples(cfg, rng):
    u = random_control(cfg, rng)
    x = np.array([0.3, -0.1])
    pred = predict(u, x, cfg)
    np.testing.assert_array_equal(residual(u, x, pred, cfg), [0.0])
    np.testing.assert_allclose(residual(u, x, pred - 1, cfg), [1.0])
    y = np.array([0.7])
    np.testing.assert_array_equal(residual(u, x, y, cfg), pred - y)


def test_zero_residual_gives_zero_disturbance():
    L, _, lam = _instance(0)
    eps = worst_case_disturbance(L, [0.0], AdversaryConfig(lam, 0.1))
    assert eps.shape == (60,) and not eps.any()


@pytest.mark.parametrize("seed", range(4))
def test_single_output_closed_form(seed):
    L, r, lam = _instance(seed)
    row = L[0]
    # gamma = row * r / (lambda1 - |row|^2)
    gamma = row * r[0] / (lam - row @ row)
    np.testing.assert_allclose(stationary_direction(L, r, lam), gamma, rtol=1e-13)
    expected = 0.1 * np.sign(r[0]) * row / np.max(np.abs(row))
    np.testing.assert_allclose(worst_case_disturbance(L, r, AdversaryConfig(lam, 0.1)), expected, rtol=1e-13)


def test_lambda_too_small_names_the_norm():
    L, r, _ = _instance(1)
    norm_sq = float(L[0] @ L[0])
    with pytest.raises(LambdaTooSmallError, match="lambda too small") as info:
        worst_case_disturbance(L, r, AdversaryConfig(0.9 * norm_sq, 0.1))
    assert info.value.spectral_norm_sq == pytest.approx(norm_sq)


def test_config_validation():
    with pytest.raises(ConfigError):
        AdversaryConfig(lambda1=0.0)
    with pytest.raises(ConfigError):
        AdversaryConfig(rho=-1.0)


@pytest.mark.parametrize("seed", range(10))
@pytest.mark.parametrize("n_o", [1, 3])
def test_push_through_matches_direct_solve(seed, n_o):
    L, r, lam = _instance(seed, n_o)
    small = stationary_direction(L, r, lam)
    direct = direct_gamma(L, r, lam)
    assert np.linalg.norm(small - direct) <= 1e-8 * np.linalg.norm(direct)


@pytest.mark.parametrize("seed", range(6))
def test_first_variation_vanishes(seed):
    L, r, lam = _instance(seed, n_o=2)
    gamma = stationary_direction(L, r, lam)
    stationarity = (L.T @ L - lam * np.eye(L.shape[1])) @ gamma + L.T @ r
    assert np.linalg.norm(stationarity) <= 1e-10 * np.linalg.norm(L.T @ r)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(-10, 10), st.integers(1, 3))
def test_direction_ignores_residual_scale(seed, exponent, n_o):
    L, r, lam = _instance(seed, n_o)
    cfg = AdversaryConfig(lam, 0.1)
    base = worst_case_disturbance(L, r, cfg)
    # power-of-two scalings are exact in floating point
    assert np.array_equal(worst_case_disturbance(L, r * 2.0**exponent, cfg), base)
    np.testing.assert_allclose(worst_case_disturbance(L, 3.7 * r, cfg), base, rtol=1e-13, atol=1e-16)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 2.0), st.integers(1, 3))
def test_output_is_feasible_and_ascends(seed, rho, n_o):
    L, r, lam = _instance(seed, n_o)
    eps = worst_case_disturbance(L, r, AdversaryConfig(lam, rho))
    assert np.max(np.abs(eps)) <= rho + 1e-12
    moved = r + L @ eps
    assert moved @ moved >= r @ r * (1 - 1e-12)
    rng = np.random.default_rng(seed)
    for _ in range(20):
        other = rng.uniform(-rho, rho, L.shape[1])
        assert np.linalg.norm(moved) >= np.linalg.norm(r + L @ other)


def test_reshaped_output(cfg, rng):
    u = random_control(cfg, rng)
    S = compute_L(u, [0.2, 0.2], cfg)
    eps = worst_case_disturbance(S, [0.5], ADV, shape=cfg.control_shape)
    assert eps.shape == (100, 30)
    assert np.max(np.abs(eps)) == pytest.approx(0.1)


def test_robust_cost_without_disturbance_is_the_sample_cost(cfg, rng):
    u = random_control(cfg, rng)
    x, y = np.array([0.5, 0.1]), np.array([1.0])
    r = predict(u, x, cfg) - y
    assert robust_cost(u, np.zeros_like(u), x, y, cfg, 0.2) == pytest.approx(float(r @ r), rel=1e-15)
    with pytest.raises(ConfigError):
        robust_cost(u, np.zeros(3), x, y, cfg, 0.2)


def test_l2_norm_uses_time_quadrature():
    eps = np.full((100, 30), 0.1)
    assert l2_norm_sq(eps, 0.01) == pytest.approx(0.01 * 3000 * 0.01)


def test_robust_cost_is_second_order_at_a_memorized_pair(cfg, rng):
    X = np.array([[0.2, -0.4]])
    u, Y = memorizing_control(random_control(cfg, rng, 0.3), X, cfg)
    S = compute_L(u, X[0], cfg)
    assert ADV.lambda1 > S.spectral_norm_sq
    d = rng.uniform(-1, 1, u.shape)
    values = [robust_cost(u, h * d, X[0], Y[0], cfg, ADV.lambda1) for h in (0.02, 0.01, 0.005)]
    assert all(abs(v) <= 50 * h * h for v, h in zip(values, (0.02, 0.01, 0.005)))
    assert abs(values[0] / values[1]) == pytest.approx(4, rel=0.1)


@pytest.mark.parametrize("seed", range(5))
def test_worst_case_beats_random_candidates_on_the_surrogate(cfg, seed):
    rng = np.random.default_rng(seed)
    u = random_control(cfg, rng, 0.5)
    x = rng.uniform(-1, 1, 2)
    S = compute_L(u, x, cfg)
    r = S.endpoint - rng.choice([-1.0, 1.0], size=1)
    eps = worst_case_disturbance(S, r, ADV)
    best = linearized_robust_cost(S.L, r, eps, ADV.lambda1, cfg.dt)
    for _ in range(20):
        other = rng.uniform(-ADV.rho, ADV.rho, u.size)
        assert best >= linearized_robust_cost(S.L, r, other, ADV.lambda1, cfg.dt)


@pytest.mark.parametrize("seed", range(5))
def test_worst_case_maximizes_over_the_sensitivity_row_space(cfg, seed):
    rng = np.random.default_rng(seed)
    u = random_control(cfg, rng, 0.5)
    S = compute_L(u, rng.uniform(-1, 1, 2), cfg)
    r = rng.standard_normal(1)
    eps = worst_case_disturbance(S, r, ADV)
    value = linearized_robust_cost(S.L, r, eps, ADV.lambda1, cfg.dt)
    _, oracle = row_space_ascent(S.L, r, ADV.lambda1, cfg.dt, ADV.rho)
    assert value >= oracle * (1 - 1e-3)
