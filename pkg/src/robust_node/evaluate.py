"""Disturbance sweeps over a trained control."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

from .adversary import AdversaryConfig, worst_case_disturbance
from .data import Dataset, sample_disturbance
from .model import ModelConfig, atomic_write_text, endpoints, readout, split_control, uplift
from .sensitivity import compute_L_batch

log = logging.getLogger(__name__)

REPORT_COLUMNS = ("model", "eps_norm", "avg_cost", "accuracy", "n_samples", "seed")


def default_eps_grid(stop: float = 0.4, step: float = 0.02) -> list:
    count = int(round(stop / step))
    return [round(i * step, 12) for i in range(count + 1)]


@dataclass
class EvalRow:
    eps_norm: float
    avg_cost: float
    accuracy: float
    n_samples: int
    seed: int
    n_diverged: int = 0
    model: str = ""


@dataclass
class EvalReport:
    rows: list = field(default_factory=list)
    # (len(grid), samples, q) predictions of the first output, kept on request
    predictions: np.ndarray | None = None

    def column(self, name) -> np.ndarray:
        return np.array([getattr(row, name) for row in self.rows])

    def row_at(self, eps_norm: float) -> EvalRow:
        for row in self.rows:
            if abs(row.eps_norm - eps_norm) < 1e-12:
                return row
        raise KeyError(eps_norm)


def classify(pred) -> np.ndarray:
    """Sign decision; exact zeros map to 0 and therefore never match a label."""
    return np.sign(np.asarray(pred, dtype=float))


def _adversarial_directions(u, test: Dataset, cfg: ModelConfig, adv: AdversaryConfig) -> np.ndarray:
    """Per-point worst-case disturbances at unit sup-norm, shape (q, N*p).

    Only the direction matters here, so where a test point is more sensitive
    than ``lambda1`` allows, the weight is raised to twice ``||L||^2`` for that
    point (with one output the direction does not depend on the weight).
    """
    L, pred = compute_L_batch(u, test.X, cfg)
    out = np.zeros((len(test), np.size(u)))
    for i in range(len(test)):
        r = pred[i] - test.targets[i]
        lam = max(adv.lambda1, 2.0 * float(np.linalg.norm(L[i], 2)) ** 2)
        out[i] = worst_case_disturbance(L[i], r, AdversaryConfig(lam, 1.0, adv.zero_threshold))
    return out


def _per_point_endpoints(u, deltas, X, cfg: ModelConfig) -> np.ndarray:
    """First output for each input ``X[i]`` under its own control ``u + deltas[i]``."""
    W, b = split_control(u, cfg)
    n = cfg.state_dim
    D = np.asarray(deltas, dtype=float).reshape(len(X), *cfg.control_shape)
    dW = D[:, :, : n * n].reshape(len(X), cfg.num_steps, n, n)
    db = D[:, :, n * n :]
    z = uplift(X, cfg)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(cfg.num_steps):
            pre = z @ W[k].T + np.einsum("bij,bj->bi", dW[:, k], z) + b[k] + db[:, k]
            z = z + cfg.dt * np.tanh(pre)
    return readout(z, cfg)[:, 0]


def evaluate(
    u,
    test: Dataset,
    eps_grid,
    samples_per_magnitude: int,
    seed: int,
    cfg: ModelConfig,
    *,
    model: str = "",
    adversarial: bool = False,
    adversary: AdversaryConfig | None = None,
    keep_predictions: bool = False,
) -> EvalReport:
    """Average cost and sign accuracy on ``test`` under disturbed controls.

    Draws are made in a fixed order from one generator seeded by ``seed``.
    Diverged (non-finite) predictions are excluded and counted.
    """
    u = np.asarray(u, dtype=float)
    grid = sorted(float(e) for e in eps_grid)
    rng = np.random.default_rng(seed)
    y = test.y
    adversary = adversary or AdversaryConfig()
    report = EvalReport()
    store = np.full((len(grid), samples_per_magnitude, len(test)), np.nan) if keep_predictions else None
    directions = _adversarial_directions(u, test, cfg, adversary) if adversarial else None
    for gi, magnitude in enumerate(grid):
        costs, hits, diverged, counted = 0.0, 0, 0, 0
        for s in range(samples_per_magnitude):
            if adversarial:
                # deterministic, so every sample repeats the first one
                if s == 0:
                    adv_pred = _per_point_endpoints(u, magnitude * directions, test.X, cfg)
                pred = adv_pred
            else:
                eps = sample_disturbance(magnitude, u.shape, rng)
                pred = endpoints(u + eps, test.X, cfg, strict=False)[:, 0]
            ok = np.isfinite(pred)
            diverged += int((~ok).sum())
            counted += int(ok.sum())
            costs += float(np.sum((pred[ok] - y[ok]) ** 2))
            hits += int(np.sum(classify(pred[ok]) == y[ok]))
            if store is not None:
                store[gi, s] = pred
        if diverged:
            log.warning("eps=%.3g: %d diverged predictions excluded", magnitude, diverged)
        report.rows.append(
            EvalRow(
                eps_norm=magnitude,
                avg_cost=costs / counted if counted else float("nan"),
                accuracy=hits / counted if counted else float("nan"),
                n_samples=samples_per_magnitude,
                seed=seed,
                n_diverged=diverged,
                model=model,
            )
        )
    report.predictions = store
    return report


def report_csv(reports) -> str:
    """CSV text for one or more reports (rows already carry their model tag)."""
    if isinstance(reports, EvalReport):
        reports = [reports]
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_COLUMNS)
    for report in reports:
        for row in report.rows:
            writer.writerow(
                [row.model, repr(row.eps_norm), repr(row.avg_cost), repr(row.accuracy), row.n_samples, row.seed]
            )
    return buf.getvalue()


def write_report(path, reports) -> None:
    atomic_write_text(path, report_csv(reports))


def read_report(path) -> list:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
