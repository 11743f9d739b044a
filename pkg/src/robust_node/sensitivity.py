"""End-point sensitivity of the Euler flow with respect to the control.

``compute_L`` returns the exact Jacobian of the discrete map
``vec(u) -> R(phi(u, E(x0)))``.  A row co-state ``c`` is swept backward from
the read-out, ``c_k = c_{k+1} (I + dt A_k)``, and the column block for step
``k`` is ``dt * c_{k+1} B_k``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergenceError
from .model import ModelConfig, _flow, readout, split_control, uplift


@dataclass(frozen=True)
class SensitivityMatrix:
    L: np.ndarray  # (n_o, N * p)
    endpoint: np.ndarray  # R(phi(u, x0)) at the linearization point
    x0: np.ndarray
    dt: float

    @property
    def spectral_norm_sq(self) -> float:
        return float(np.linalg.eigvalsh(self.L @ self.L.T)[-1])


def jacobians_along(u, traj, cfg: ModelConfig):
    """Per-step Jacobians of ``f(x, u) = tanh(W x + b)`` along ``traj``.

    Returns ``A`` of shape (N, n, n) and ``B`` of shape (N, n, p); ``B[k]``
    acts on one row of the control in the package's flattening order.
    """
    u = np.asarray(u, dtype=float)
    traj = np.asarray(traj, dtype=float)
    n, N = cfg.state_dim, cfg.num_steps
    if u.shape != cfg.control_shape or traj.shape != (N + 1, n):
        raise ConfigError("control/trajectory shapes do not match the config")
    W, b = split_control(u, cfg)
    x = traj[:-1]
    s = np.tanh(np.einsum("kij,kj->ki", W, x) + b)
    D = 1.0 - s * s
    A = D[:, :, None] * W
    B = np.zeros((N, n, cfg.num_params))
    idx = np.arange(n)
    for i in range(n):
        B[:, i, i * n : (i + 1) * n] = D[:, i, None] * x
    B[:, idx, n * n + idx] = D
    return A, B


def _backward(u: np.ndarray, Z0: np.ndarray, cfg: ModelConfig):
    """Batched adjoint sweep.  Returns L of shape (B, n_o, N*p) and end states."""
    n, N, dt = cfg.state_dim, cfg.num_steps, cfg.dt
    W, b = split_control(u, cfg)
    with np.errstate(all="ignore"):
        states = _flow(u, Z0, cfg, keep_states=True)  # (N+1, B, n)
    if not np.all(np.isfinite(states)):
        finite = np.isfinite(states).reshape(N + 1, -1).all(axis=1)
        raise DivergenceError(int(np.argmin(finite)))
    batch = Z0.shape[0]
    n_o = cfg.output_dim
    L = np.empty((batch, n_o, N, cfg.num_params))
    c = np.broadcast_to(cfg.readout_matrix, (batch, n_o, n)).copy()
    for k in range(N - 1, -1, -1):
        x = states[k]
        s = np.tanh(x @ W[k].T + b[k])
        g = c * (1.0 - s * s)[:, None, :]  # c_{k+1} D_k, shape (B, n_o, n)
        L[:, :, k, : n * n] = dt * (g[:, :, :, None] * x[:, None, None, :]).reshape(
            batch, n_o, n * n
        )
        L[:, :, k, n * n :] = dt * g
        c = c + dt * (g @ W[k])
    return L.reshape(batch, n_o, N * cfg.num_params), states[-1]


def compute_L(u, x0, cfg: ModelConfig) -> SensitivityMatrix:
    u = np.asarray(u, dtype=float)
    if u.shape != cfg.control_shape:
        raise ConfigError(f"control has shape {u.shape}, expected {cfg.control_shape}")
    x0 = np.asarray(x0, dtype=float)
    L, zN = _backward(u, uplift(x0, cfg)[None, :], cfg)
    return SensitivityMatrix(L=L[0], endpoint=readout(zN[0], cfg), x0=x0, dt=cfg.dt)


def compute_L_batch(u, X, cfg: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Sensitivities for many inputs at once.

    Returns ``(L, pred)`` with shapes (B, n_o, N*p) and (B, n_o).
    """
    u = np.asarray(u, dtype=float)
    if u.shape != cfg.control_shape:
        raise ConfigError(f"control has shape {u.shape}, expected {cfg.control_shape}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        return np.zeros((0, cfg.output_dim, u.size)), np.zeros((0, cfg.output_dim))
    L, zN = _backward(u, uplift(X, cfg), cfg)
    return L, readout(zN, cfg)
