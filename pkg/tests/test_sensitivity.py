import numpy as np
import pytest

from robust_node.model import ModelConfig, integrate, predict, random_control, split_control, zero_control
from robust_node.sensitivity import compute_L, compute_L_batch, jacobians_along


def _f(x, row, n):
    W = row[: n * n].reshape(n, n)
    return np.tanh(W @ x + row[n * n :])


def test_jacobians_at_zero_control(cfg):
    u = zero_control(cfg)
    x0 = [0.4, -0.7]
    A, B = jacobians_along(u, integrate(u, x0, cfg), cfg)
    np.testing.assert_array_equal(A, 0.0)
    x = np.array([0.4, -0.7, 0, 0, 0])
    dW = np.arange(25.0).reshape(5, 5) / 10
    db = np.linspace(-1, 1, 5)
    np.testing.assert_allclose(B[10] @ np.concatenate([dW.ravel(), db]), dW @ x + db)


def test_zero_state_kills_weight_sensitivity(cfg, rng):
    u = random_control(cfg, rng)
    u[:, 25:] = 0.0  # b = 0 keeps the origin fixed
    A, B = jacobians_along(u, integrate(u, [0.0, 0.0], cfg), cfg)
    np.testing.assert_array_equal(B[:, :, :25], 0.0)
    np.testing.assert_array_equal(B[:, :, 25:], np.broadcast_to(np.eye(5), (100, 5, 5)))


def test_jacobians_match_central_differences(cfg, rng):
    u = random_control(cfg, rng, scale=0.8)
    traj = integrate(u, [0.3, 0.9], cfg)
    A, B = jacobians_along(u, traj, cfg)
    n, h = 5, 1e-6
    for k in (0, 41, 99):
        x, row = traj[k], u[k]
        A_fd = np.column_stack([(_f(x + h * e, row, n) - _f(x - h * e, row, n)) / (2 * h) for e in np.eye(n)])
        B_fd = np.column_stack([(_f(x, row + h * e, n) - _f(x, row - h * e, n)) / (2 * h) for e in np.eye(30)])
        assert np.linalg.norm(A[k] - A_fd) <= 1e-6 * np.linalg.norm(A_fd)
        assert np.linalg.norm(B[k] - B_fd) <= 1e-6 * np.linalg.norm(B_fd)


def test_L_at_origin_with_zero_control(cfg):
    S = compute_L(zero_control(cfg), [0.0, 0.0], cfg)
    blocks = S.L.reshape(100, 30)
    np.testing.assert_array_equal(blocks[:, :25], 0.0)
    np.testing.assert_allclose(blocks[:, 25:], np.tile(0.01 * np.array([0, 0, 0, 0, 1.0]), (100, 1)))


def test_scalar_system_integrates_the_bias_variation():
    cfg = ModelConfig(state_dim=1, input_dim=1, output_dim=1)
    u = 1e-4 * np.ones(cfg.control_shape)
    S = compute_L(u, [1e-4], cfg)
    blocks = S.L.reshape(100, 2)
    # near the linear regime of tanh the end point is x0 + sum_k dt * u_b[k]
    np.testing.assert_allclose(blocks[:, 1], 0.01, rtol=1e-3)
    # and the weight column integrates dt * x_k along the (nearly linear) trajectory
    np.testing.assert_allclose(blocks[:, 0], 0.01 * integrate(u, [1e-4], cfg)[:-1, 0], rtol=1e-3)


def test_blocks_equal_forward_transition_products(cfg, rng):
    u = random_control(cfg, rng, scale=0.6)
    x0 = [-0.5, 0.2]
    S = compute_L(u, x0, cfg)
    A, B = jacobians_along(u, integrate(u, x0, cfg), cfg)
    R = cfg.readout_matrix
    for k in (0, 17, 63, 99):
        Phi = np.eye(5)
        for m in range(k + 1, 100):
            Phi = (np.eye(5) + cfg.dt * A[m]) @ Phi
        expected = cfg.dt * R @ Phi @ B[k]
        np.testing.assert_allclose(S.L[:, k * 30 : (k + 1) * 30], expected, rtol=1e-12, atol=1e-16)


@pytest.mark.parametrize("seed", range(5))
def test_second_order_finite_difference_convergence(cfg, seed):
    rng = np.random.default_rng(seed)
    u = random_control(cfg, rng, scale=0.5)
    x0 = rng.uniform(-1, 1, 2)
    S = compute_L(u, x0, cfg)
    d = rng.standard_normal(u.shape)
    err = [abs(predict(u + h * d, x0, cfg)[0] - S.endpoint[0] - h * (S.L @ d.ravel())[0]) for h in (4e-3, 2e-3)]
    assert 3.5 <= err[0] / err[1] <= 4.5


def test_rank_bounded_by_outputs(rng):
    cfg = ModelConfig(output_dim=2)
    u = random_control(cfg, rng, scale=0.5)
    S = compute_L(u, [0.3, 0.1], cfg)
    assert S.L.shape == (2, 3000)
    assert np.linalg.matrix_rank(S.L) <= 2


def test_rows_are_the_single_output_sensitivities(rng):
    two = ModelConfig(output_dim=2)
    u = random_control(two, rng, scale=0.5)
    x0 = [0.2, -0.6]
    S = compute_L(u, x0, two)
    for row, index in ((0, 3), (1, 4)):
        single = ModelConfig(readout_row_index=index)
        np.testing.assert_allclose(S.L[row], compute_L(u, x0, single).L[0], rtol=1e-13, atol=1e-18)


def test_batch_matches_single(cfg, rng):
    u = random_control(cfg, rng, scale=0.5)
    X = rng.uniform(-1, 1, (4, 2))
    L, pred = compute_L_batch(u, X, cfg)
    for i, x in enumerate(X):
        S = compute_L(u, x, cfg)
        np.testing.assert_allclose(L[i], S.L, rtol=1e-12, atol=1e-17)
        np.testing.assert_allclose(pred[i], S.endpoint, rtol=0, atol=1e-14)
    assert compute_L_batch(u, np.zeros((0, 2)), cfg)[0].shape == (0, 1, 3000)
