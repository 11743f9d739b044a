"""Controlled dynamics x' = tanh(W(t) x + b(t)) with explicit-Euler flow.

A control signal is an ``(N, p)`` float array with ``p = n**2 + n`` for state
dimension ``n``.  Row ``k`` holds ``W(t_k)`` flattened row-major followed by
``b(t_k)``, and is applied on ``[k*dt, (k+1)*dt)`` (zero-order hold).  A
trajectory is an ``(N + 1, n)`` array whose first row is the uplifted input.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DivergenceError

FLATTEN_ORDER = "W_row_major_then_b"
_CHECKPOINT_MAGIC = "# robust_node control v1"


@dataclass(frozen=True)
class ModelConfig:
    state_dim: int = 5
    input_dim: int = 2
    output_dim: int = 1
    num_steps: int = 100
    dt: float = 0.01
    # 0-based index of the first read-out coordinate; None selects the last
    # ``output_dim`` coordinates.
    readout_row_index: int | None = None

    def __post_init__(self):
        for name in ("state_dim", "input_dim", "output_dim", "num_steps"):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive, got {self.dt!r}")
        if abs(self.num_steps * self.dt - 1.0) > 1e-12:
            raise ConfigError(
                f"num_steps * dt must equal 1.0, got {self.num_steps} * {self.dt}"
            )
        if self.input_dim > self.state_dim:
            raise ConfigError("input_dim must not exceed state_dim")
        first = self.readout_start
        if first < 0 or first + self.output_dim > self.state_dim:
            raise ConfigError(
                f"readout rows [{first}, {first + self.output_dim}) fall outside "
                f"state_dim={self.state_dim}"
            )

    @property
    def readout_start(self) -> int:
        if self.readout_row_index is None:
            return self.state_dim - self.output_dim
        return int(self.readout_row_index)

    @property
    def num_params(self) -> int:
        return self.state_dim * self.state_dim + self.state_dim

    @property
    def control_shape(self) -> tuple[int, int]:
        return (self.num_steps, self.num_params)

    @property
    def readout_matrix(self) -> np.ndarray:
        R = np.zeros((self.output_dim, self.state_dim))
        start = self.readout_start
        R[np.arange(self.output_dim), start + np.arange(self.output_dim)] = 1.0
        return R

    @classmethod
    def with_steps(cls, num_steps: int, **kwargs) -> "ModelConfig":
        """Config on ``[0, 1]`` with ``num_steps`` Euler steps."""
        return cls(num_steps=num_steps, dt=1.0 / num_steps, **kwargs)


def check_control(u, cfg: ModelConfig) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if u.shape != cfg.control_shape:
        raise ConfigError(f"control has shape {u.shape}, expected {cfg.control_shape}")
    if not np.all(np.isfinite(u)):
        raise ConfigError("control contains non-finite entries")
    return u


def split_control(u: np.ndarray, cfg: ModelConfig) -> tuple[np.ndarray, np.ndarray]:
    """Return views ``W`` of shape (N, n, n) and ``b`` of shape (N, n)."""
    n = cfg.state_dim
    W = u[:, : n * n].reshape(u.shape[0], n, n)
    b = u[:, n * n :]
    return W, b


def join_control(W: np.ndarray, b: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.concatenate([W.reshape(W.shape[0], -1), b], axis=1)


def zero_control(cfg: ModelConfig) -> np.ndarray:
    return np.zeros(cfg.control_shape)


def random_control(cfg: ModelConfig, rng, scale: float = 0.1) -> np.ndarray:
    return scale * rng.standard_normal(cfg.control_shape)


def uplift(x, cfg: ModelConfig) -> np.ndarray:
    """Embed inputs into the state space by zero padding.

    Accepts a single input vector or a batch of shape (B, input_dim).
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != cfg.input_dim:
        raise ConfigError(f"input has length {x.shape[-1]}, expected {cfg.input_dim}")
    z = np.zeros(x.shape[:-1] + (cfg.state_dim,))
    z[..., : cfg.input_dim] = x
    return z


def readout(z, cfg: ModelConfig) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.shape[-1] != cfg.state_dim:
        raise ConfigError(f"state has length {z.shape[-1]}, expected {cfg.state_dim}")
    start = cfg.readout_start
    return z[..., start : start + cfg.output_dim].copy()


def _flow(u: np.ndarray, z0: np.ndarray, cfg: ModelConfig, keep_states: bool):
    """Euler flow for a batch of uplifted states ``z0`` of shape (B, n)."""
    W, b = split_control(u, cfg)
    dt = cfg.dt
    z = z0
    states = [z] if keep_states else None
    for k in range(cfg.num_steps):
        z = z + dt * np.tanh(z @ W[k].T + b[k])
        if keep_states:
            states.append(z)
    if keep_states:
        return np.stack(states)
    return z


def _first_bad_step(states: np.ndarray) -> int:
    finite = np.isfinite(states).reshape(states.shape[0], -1).all(axis=1)
    return int(np.argmin(finite))


def integrate(u, x0, cfg: ModelConfig) -> np.ndarray:
    """Trajectory of the uplifted input ``x0`` under control ``u``.

    Raises DivergenceError naming the first Euler step with a non-finite state.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != cfg.control_shape:
        raise ConfigError(f"control has shape {u.shape}, expected {cfg.control_shape}")
    z0 = uplift(x0, cfg)
    if z0.ndim != 1:
        raise ConfigError("integrate takes a single input; use endpoints() for batches")
    with np.errstate(all="ignore"):
        states = _flow(u, z0[None, :], cfg, keep_states=True)[:, 0, :]
    if not np.all(np.isfinite(states)):
        raise DivergenceError(_first_bad_step(states))
    return states


def endpoints(u, X, cfg: ModelConfig, *, strict: bool = True) -> np.ndarray:
    """Predictions R(phi(u, E(x))) for a batch ``X`` of shape (B, input_dim).

    With ``strict=False`` diverged samples come back as NaN rows instead of
    raising.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != cfg.control_shape:
        raise ConfigError(f"control has shape {u.shape}, expected {cfg.control_shape}")
    Z0 = uplift(np.atleast_2d(X), cfg)
    with np.errstate(all="ignore"):
        zN = _flow(u, Z0, cfg, keep_states=False)
    out = readout(zN, cfg)
    bad = ~np.all(np.isfinite(zN), axis=1)
    if bad.any():
        if strict:
            states = _flow(u, Z0[bad][:1], cfg, keep_states=True)[:, 0, :]
            raise DivergenceError(_first_bad_step(states))
        out[bad] = np.nan
    return out


def predict(u, x0, cfg: ModelConfig) -> np.ndarray:
    return readout(integrate(u, x0, cfg)[-1], cfg)


def perturbed_endpoint(u, eps, x0, cfg: ModelConfig) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    eps = np.asarray(eps, dtype=float)
    if eps.shape != u.shape:
        raise ConfigError(f"disturbance shape {eps.shape} differs from control {u.shape}")
    return predict(u + eps, x0, cfg)


# -- checkpoints --------------------------------------------------------------


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_control(path, u, cfg: ModelConfig, meta: dict | None = None) -> None:
    u = check_control(u, cfg)
    N, p = u.shape
    lines = [
        _CHECKPOINT_MAGIC,
        f"# N={N} p={p} dt={cfg.dt!r} state_dim={cfg.state_dim} order={FLATTEN_ORDER}",
    ]
    if meta is not None:
        lines.append("# meta=" + json.dumps(meta, sort_keys=True))
    for row in u:
        lines.append(",".join(repr(float(v)) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def load_control(path) -> tuple[np.ndarray, dict, dict]:
    """Read a checkpoint; returns ``(u, header, meta)``."""
    with open(path) as fh:
        text = fh.read().splitlines()
    if not text or text[0] != _CHECKPOINT_MAGIC:
        raise ConfigError(f"{path}: not a control checkpoint")
    header: dict = {}
    meta: dict = {}
    rows = []
    for line in text[1:]:
        if line.startswith("# meta="):
            meta = json.loads(line[len("# meta="):])
        elif line.startswith("#"):
            for item in line[1:].split():
                key, _, value = item.partition("=")
                header[key] = value
        elif line.strip():
            rows.append([float(v) for v in line.split(",")])
    try:
        N, p = int(header["N"]), int(header["p"])
        header = {
            "N": N,
            "p": p,
            "dt": float(header["dt"]),
            "state_dim": int(header["state_dim"]),
            "order": header["order"],
        }
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"{path}: malformed checkpoint header") from exc
    if header["order"] != FLATTEN_ORDER:
        raise ConfigError(f"{path}: unsupported flattening order {header['order']}")
    u = np.array(rows, dtype=float)
    if u.shape != (N, p):
        raise ConfigError(f"{path}: body has shape {u.shape}, header says {(N, p)}")
    return u, header, meta
