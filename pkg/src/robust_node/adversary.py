"""Closed-form worst-case control disturbance and the robust cost."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, LambdaTooSmallError
from .model import ModelConfig, predict

# Relative slack on the ascent assertion; the exact value is >= 0.
_ASCENT_SLACK = 1e-12


@dataclass(frozen=True)
class AdversaryConfig:
    lambda1: float = 0.2
    rho: float = 0.1
    zero_threshold: float = 1e-10

    def __post_init__(self):
        if not self.lambda1 > 0:
            raise ConfigError(f"lambda1 must be positive, got {self.lambda1}")
        if not self.rho >= 0:
            raise ConfigError(f"rho must be nonnegative, got {self.rho}")
        if not self.zero_threshold > 0:
            raise ConfigError("zero_threshold must be positive")


def _as_matrix(L) -> np.ndarray:
    L = getattr(L, "L", L)
    L = np.asarray(L, dtype=float)
    if L.ndim != 2:
        raise ConfigError(f"sensitivity matrix must be 2-D, got shape {L.shape}")
    return L


def residual(u, x, y, cfg: ModelConfig) -> np.ndarray:
    return predict(u, x, cfg) - np.asarray(y, dtype=float)


def stationary_direction(L, r, lambda1: float) -> np.ndarray:
    """Unnormalized stationary point ``(lambda1 I - L^T L)^{-1} L^T r``.

    Solved through the output-space system ``L^T (lambda1 I - L L^T)^{-1} r``.
    """
    L = _as_matrix(L)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    gram = L @ L.T
    top = float(np.linalg.eigvalsh(gram)[-1]) if gram.size else 0.0
    if not lambda1 > top:
        raise LambdaTooSmallError(lambda1, top)
    w = np.linalg.solve(lambda1 * np.eye(gram.shape[0]) - gram, r)
    return L.T @ w


def worst_case_disturbance(L, r, cfg: AdversaryConfig, shape=None) -> np.ndarray:
    """Disturbance of sup-norm ``rho`` along the stationary direction.

    Returns a flat vector of length ``L.shape[1]`` unless ``shape`` is given.
    A (numerically) zero direction yields the zero disturbance.
    """
    L = _as_matrix(L)
    r = np.atleast_1d(np.asarray(r, dtype=float))
    gamma = stationary_direction(L, r, cfg.lambda1)
    peak = float(np.max(np.abs(gamma))) if gamma.size else 0.0
    if peak <= cfg.zero_threshold:
        eps = np.zeros_like(gamma)
    else:
        eps = (cfg.rho / peak) * gamma
        base = float(r @ r)
        moved = r + L @ eps
        # r^T L L^T (lambda1 - L L^T)^{-1} r >= 0, so the residual never shrinks.
        assert float(moved @ moved) >= base * (1.0 - _ASCENT_SLACK), "ascent violated"
    if shape is not None:
        eps = eps.reshape(shape)
    return eps


def l2_norm_sq(eps, dt: float) -> float:
    """Time-integrated squared norm ``dt * sum_k |eps_k|^2``."""
    eps = np.asarray(eps, dtype=float)
    return float(dt * np.sum(eps * eps))


def robust_cost(u, eps, x, y, model_cfg: ModelConfig, lambda1: float) -> float:
    u = np.asarray(u, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if eps.shape != u.shape:
        raise ConfigError(f"disturbance shape {eps.shape} differs from control {u.shape}")
    r = predict(u + eps, x, model_cfg) - np.asarray(y, dtype=float)
    return float(r @ r) - lambda1 * l2_norm_sq(eps, model_cfg.dt)


def linearized_robust_cost(L, r, eps, lambda1: float, dt: float) -> float:
    """First-order surrogate ``|r + L eps|^2 - lambda1 |eps|_2^2``."""
    L = _as_matrix(L)
    eps = np.asarray(eps, dtype=float).ravel()
    moved = np.atleast_1d(r) + L @ eps
    return float(moved @ moved) - lambda1 * l2_norm_sq(eps, dt)
