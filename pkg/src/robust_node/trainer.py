"""Sequential robust training with kernel-projected descent, plus the baseline.

The robust trainer introduces data pairs one at a time.  For each new pair it
repeats: re-linearize the memorized pairs at the current control, build the
worst-case disturbance for the new pair, take the gradient of the new pair's
cost at the disturbed control, project it onto the null space of the memorized
sensitivities and step.  Costs used for convergence are read at the
undisturbed control as well as at the disturbed one.
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .adversary import AdversaryConfig, l2_norm_sq, worst_case_disturbance
from .errors import ConfigError, LambdaTooSmallError, TrainingError
from .model import ModelConfig, atomic_write_text, endpoints, random_control
from .projector import ConstraintStack
from .sensitivity import compute_L_batch

log = logging.getLogger(__name__)

HISTORY_COLUMNS = (
    "j",
    "k",
    "cost_new_point",
    "robust_cost",
    "max_drift_memorized",
    "grad_norm",
    "alpha",
)


@dataclass(frozen=True)
class TrainConfig:
    lambda1: float = 0.2
    rho: float = 0.1
    zero_threshold: float = 1e-10
    learning_rate: float = 10.0
    lr_decay: float = 0.5
    min_learning_rate: float = 1e-4
    inner_tol: float = 1e-4
    max_inner_iters: int = 4000
    max_outer_passes: int = 3
    max_standard_iters: int = 20000
    drift_factor: float = 10.0
    init_scale: float = 0.1
    seed: int = 0
    shuffle: bool = False
    abort_on_failure: bool = False
    probe_drift: bool = False

    def __post_init__(self):
        positive = (
            "lambda1",
            "learning_rate",
            "min_learning_rate",
            "inner_tol",
            "max_inner_iters",
            "max_standard_iters",
            "drift_factor",
        )
        for name in positive:
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        if not 0 < self.lr_decay < 1:
            raise ConfigError(f"lr_decay must lie in (0, 1), got {self.lr_decay}")
        if self.max_outer_passes < 1:
            raise ConfigError("max_outer_passes must be at least 1")
        if self.rho < 0 or self.init_scale < 0:
            raise ConfigError("rho and init_scale must be nonnegative")

    @property
    def adversary(self) -> AdversaryConfig:
        return AdversaryConfig(self.lambda1, self.rho, self.zero_threshold)


@dataclass
class TrainState:
    u: np.ndarray
    stack: ConstraintStack
    memorized: list = field(default_factory=list)
    history: list = field(default_factory=list)
    failures: list = field(default_factory=list)
    mode: str = "robust"


def initial_control(model_cfg: ModelConfig, cfg: TrainConfig) -> np.ndarray:
    rng = np.random.default_rng(cfg.seed)
    return random_control(model_cfg, rng, cfg.init_scale)


def _pairs(X, Y, model_cfg: ModelConfig):
    X = np.asarray(X, dtype=float).reshape(-1, model_cfg.input_dim)
    Y = np.asarray(Y, dtype=float).reshape(-1, model_cfg.output_dim)
    if len(X) != len(Y):
        raise ConfigError("inputs and targets differ in length")
    if len(X) == 0:
        raise ConfigError("dataset is empty")
    return X, Y


def per_sample_cost(u, x, y, model_cfg: ModelConfig) -> float:
    r = endpoints(u, np.atleast_2d(x), model_cfg)[0] - np.asarray(y, dtype=float)
    return float(r @ r)


def per_sample_costs(u, X, Y, model_cfg: ModelConfig) -> np.ndarray:
    X, Y = _pairs(X, Y, model_cfg)
    r = endpoints(u, X, model_cfg) - Y
    return np.sum(r * r, axis=1)


def per_sample_gradient(u, x, y, model_cfg: ModelConfig) -> np.ndarray:
    """Gradient ``2 L^T r`` of the per-sample cost, shaped like ``u``."""
    L, pred = compute_L_batch(u, np.atleast_2d(x), model_cfg)
    r = pred[0] - np.asarray(y, dtype=float)
    return (2.0 * L[0].T @ r).reshape(np.shape(u))


def _new_state(u, model_cfg: ModelConfig, mode: str) -> TrainState:
    return TrainState(
        u=np.array(u, dtype=float),
        stack=ConstraintStack(num_columns=int(np.size(u))),
        mode=mode,
    )


def inner_loop(state: TrainState, X, Y, j: int, model_cfg: ModelConfig, cfg: TrainConfig) -> bool:
    """Fit pair ``j`` while holding the memorized pairs fixed to first order.

    Appends ``j`` to ``state.memorized`` and returns True on convergence;
    otherwise records a failure (or raises TrainingError when configured to).
    """
    adv = cfg.adversary
    tol = cfg.inner_tol
    x, y = X[j], Y[j]
    alpha = cfg.learning_rate
    shape = state.u.shape
    prev = None  # (u, direction, monitored cost) of the last accepted step

    for k in range(cfg.max_inner_iters):
        u = state.u
        mem = list(state.memorized)
        try:
            L_all, pred_all = compute_L_batch(u, np.vstack([X[mem], x[None, :]]), model_cfg)
        except FloatingPointError as exc:
            raise TrainingError(f"divergence while fitting pair {j}: {exc}", state) from exc
        state.stack.set_blocks(L_all[:-1], mem)
        L_new = L_all[-1]
        r = pred_all[-1] - y
        cost = float(r @ r)
        mem_res = pred_all[:-1] - Y[mem]
        max_drift = float(np.max(np.abs(mem_res))) if mem else 0.0

        try:
            eps = worst_case_disturbance(L_new, r, adv)
        except LambdaTooSmallError as exc:
            # the last step left the region where the adversary is defined
            if prev is not None and alpha * cfg.lr_decay >= cfg.min_learning_rate:
                alpha *= cfg.lr_decay
                state.u = prev[0] - alpha * prev[1]
                continue
            if prev is not None:
                state.u = prev[0]
            return _fail(state, cfg, j, "lambda_too_small", cost, float("nan"), exc)
        if np.any(eps):
            L_pert, pred_pert = compute_L_batch(u + eps.reshape(shape), x[None, :], model_cfg)
            L_pert, r_pert = L_pert[0], pred_pert[0] - y
        else:
            L_pert, r_pert = L_new, r
        monitored = float(r_pert @ r_pert)

        if prev is not None and cost > prev[2] and alpha * cfg.lr_decay >= cfg.min_learning_rate:
            alpha *= cfg.lr_decay
            state.u = prev[0] - alpha * prev[1]
            continue

        record = {
            "j": j,
            "k": k,
            "cost_new_point": cost,
            "robust_cost": monitored - adv.lambda1 * l2_norm_sq(eps, model_cfg.dt),
            "max_drift_memorized": max_drift,
            "grad_norm": 0.0,
            "alpha": alpha,
        }
        if cost <= tol and monitored <= tol:
            state.history.append(record)
            state.memorized.append(j)
            return True

        g = 2.0 * L_pert.T @ r_pert
        d = state.stack.project(g)
        record["grad_norm"] = float(np.linalg.norm(g))
        step = d.reshape(shape)
        if cfg.probe_drift and mem:
            full = endpoints(u - alpha * step, X[mem], model_cfg)
            half = endpoints(u - 0.5 * alpha * step, X[mem], model_cfg)
            base = pred_all[:-1]
            record["drift_full"] = float(np.max(np.abs(full - base)))
            record["drift_half"] = float(np.max(np.abs(half - base)))
        state.history.append(record)
        prev = (u, step, cost)
        state.u = u - alpha * step

    return _fail(state, cfg, j, "max_inner_iters", cost, monitored)


def _fail(state: TrainState, cfg: TrainConfig, j: int, reason: str, cost: float, monitored: float, cause=None) -> bool:
    state.failures.append({"index": int(j), "reason": reason, "cost": cost, "robust": monitored})
    log.warning("pair %d not learned (%s): cost=%.3g disturbed=%.3g", j, reason, cost, monitored)
    if cfg.abort_on_failure:
        raise TrainingError(f"pair {j} not learned: {reason}", state) from cause
    return False


def _repair(state: TrainState, X, Y, model_cfg: ModelConfig, cfg: TrainConfig, visits: dict) -> None:
    """Re-fit memorized pairs whose cost drifted above ``drift_factor * inner_tol``."""
    limit = cfg.drift_factor * cfg.inner_tol
    while state.memorized:
        mem = state.memorized
        costs = per_sample_costs(state.u, X[mem], Y[mem], model_cfg)
        worst = int(np.argmax(costs))
        if costs[worst] <= limit:
            return
        i = mem[worst]
        if visits.get(i, 0) >= cfg.max_outer_passes:
            state.memorized.remove(i)
            state.failures.append({"index": i, "reason": "drift", "cost": float(costs[worst])})
            log.warning("pair %d drifted (cost %.3g) and exhausted its repair passes", i, costs[worst])
            if cfg.abort_on_failure:
                raise TrainingError(f"pair {i} drifted beyond repair", state)
            continue
        visits[i] = visits.get(i, 0) + 1
        log.info("repairing pair %d (cost %.3g)", i, costs[worst])
        state.memorized.remove(i)
        inner_loop(state, X, Y, i, model_cfg, cfg)


def train_robust(X, Y, model_cfg: ModelConfig, cfg: TrainConfig, u0=None, callback=None) -> TrainState:
    """Memorize the pairs one at a time under worst-case control disturbance."""
    X, Y = _pairs(X, Y, model_cfg)
    u0 = initial_control(model_cfg, cfg) if u0 is None else u0
    state = _new_state(u0, model_cfg, "robust")
    order = np.arange(len(X))
    if cfg.shuffle:
        order = np.random.default_rng(cfg.seed).permutation(len(X))
    visits: dict = {}
    for j in order:
        j = int(j)
        visits[j] = visits.get(j, 0) + 1
        ok = inner_loop(state, X, Y, j, model_cfg, cfg)
        _repair(state, X, Y, model_cfg, cfg, visits)
        log.info("outer step %d: %s, %d memorized", j, "ok" if ok else "failed", len(state.memorized))
        if callback is not None:
            callback(state, j)
    return state


def train_standard(X, Y, model_cfg: ModelConfig, cfg: TrainConfig, u0=None) -> TrainState:
    """Full-batch gradient descent on the summed per-sample cost."""
    X, Y = _pairs(X, Y, model_cfg)
    u = np.array(initial_control(model_cfg, cfg) if u0 is None else u0, dtype=float)
    state = _new_state(u, model_cfg, "standard")
    alpha = cfg.learning_rate
    prev = None
    for k in range(cfg.max_standard_iters):
        L, pred = compute_L_batch(state.u, X, model_cfg)
        R = pred - Y
        costs = np.sum(R * R, axis=1)
        total = float(costs.sum())
        if prev is not None and total > prev[2] and alpha * cfg.lr_decay >= cfg.min_learning_rate:
            alpha *= cfg.lr_decay
            state.u = prev[0] - alpha * prev[1]
            continue
        g = 2.0 * np.einsum("bop,bo->p", L, R)
        state.history.append(
            {
                "j": len(X),
                "k": k,
                "cost_new_point": total / len(X),
                "robust_cost": float("nan"),
                "max_drift_memorized": float(np.sqrt(costs.max())),
                "grad_norm": float(np.linalg.norm(g)),
                "alpha": alpha,
            }
        )
        if costs.max() <= cfg.inner_tol:
            break
        prev = (state.u, g.reshape(state.u.shape), total)
        state.u = state.u - alpha * prev[1]
    final = per_sample_costs(state.u, X, Y, model_cfg)
    state.memorized = [int(i) for i in np.flatnonzero(final <= cfg.inner_tol)]
    return state


def history_csv(history) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=HISTORY_COLUMNS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in history:
        writer.writerow({key: repr(row[key]) if isinstance(row[key], float) else row[key] for key in HISTORY_COLUMNS})
    return buf.getvalue()


def write_history(path, history) -> None:
    atomic_write_text(path, history_csv(history))


def config_snapshot(model_cfg: ModelConfig, cfg: TrainConfig) -> dict:
    return {"model": asdict(model_cfg), "train": asdict(cfg)}
