"""Null-space projection against the stacked sensitivities of memorized points."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelConfig
from .sensitivity import compute_L_batch

# Singular values at or below this fraction of the largest are treated as zero.
RANK_RTOL = 1e-10


def _row_basis(M: np.ndarray) -> np.ndarray:
    """Orthonormal basis (as rows) for the row space of ``M``."""
    if M.shape[0] == 0:
        return np.zeros((0, M.shape[1]))
    _, s, Vt = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((0, M.shape[1]))
    keep = s > RANK_RTOL * s[0]
    return Vt[keep]


def project_onto_kernel(M, g) -> np.ndarray:
    """L2-closest vector to ``g`` in the right null space of ``M``."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    g = np.asarray(g, dtype=float)
    V = _row_basis(M)
    flat = g.ravel()
    return (flat - V.T @ (V @ flat)).reshape(g.shape)


@dataclass
class ConstraintStack:
    """Sensitivity blocks of the memorized points, one ``(n_o, N*p)`` per point."""

    num_columns: int
    indices: list = field(default_factory=list)
    blocks: list = field(default_factory=list)
    endpoints: list = field(default_factory=list)
    _basis: np.ndarray | None = field(default=None, repr=False)

    @property
    def j(self) -> int:
        return len(self.indices)

    @property
    def rows(self) -> np.ndarray:
        if not self.blocks:
            return np.zeros((0, self.num_columns))
        return np.concatenate(self.blocks, axis=0)

    def refresh(self, u, X, cfg: ModelConfig, indices=None) -> "ConstraintStack":
        """Recompute every block at control ``u`` for inputs ``X``."""
        X = np.asarray(X, dtype=float).reshape(-1, cfg.input_dim)
        L, pred = compute_L_batch(u, X, cfg)
        self.blocks = list(L)
        self.endpoints = list(pred)
        self.indices = list(range(len(X))) if indices is None else list(indices)
        self._basis = None
        return self

    def set_blocks(self, blocks, indices) -> "ConstraintStack":
        self.blocks = [np.atleast_2d(np.asarray(b, dtype=float)) for b in blocks]
        self.indices = list(indices)
        self.endpoints = []
        self._basis = None
        return self

    def project(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if not self.blocks:
            return g.copy()
        if self._basis is None:
            self._basis = _row_basis(self.rows)
        flat = g.ravel()
        return (flat - self._basis.T @ (self._basis @ flat)).reshape(g.shape)


def refresh(stack: ConstraintStack, u, X, cfg: ModelConfig, indices=None) -> ConstraintStack:
    return stack.refresh(u, X, cfg, indices)


def project_to_kernel(stack, g) -> np.ndarray:
    """Project ``g`` onto the null space of a stack (or a raw matrix)."""
    if isinstance(stack, ConstraintStack):
        return stack.project(g)
    return project_onto_kernel(stack, g)
