"""Disk-classification data and random control disturbances."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .model import atomic_write_text


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray  # (q, 2)
    y: np.ndarray  # (q,) entries +1 / -1
    split: str = "train"
    seed: int | None = None
    radius: float = 0.5

    def __len__(self):
        return len(self.y)

    @property
    def targets(self) -> np.ndarray:
        return self.y.reshape(-1, 1)


def disk_labels(X, radius: float = 0.5) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    return np.where(np.linalg.norm(X, axis=-1) <= radius, 1.0, -1.0)


def generate_dataset(q: int, seed: int, radius: float = 0.5, bound: float = 1.0, split: str = "train") -> Dataset:
    """``q`` distinct points uniform on ``[-bound, bound]^2`` with disk labels."""
    if q < 1:
        raise ConfigError(f"q must be at least 1, got {q}")
    rng = np.random.default_rng(seed)
    points = np.empty((0, 2))
    while len(points) < q:
        fresh = rng.uniform(-bound, bound, size=(q - len(points), 2))
        merged = np.concatenate([points, fresh])
        _, first = np.unique(merged, axis=0, return_index=True)
        points = merged[np.sort(first)]
    return Dataset(points, disk_labels(points, radius), split, seed, radius)


def sample_disturbance(magnitude: float, shape, seed) -> np.ndarray:
    """Uniform random direction rescaled to sup-norm ``magnitude``."""
    if magnitude < 0:
        raise ConfigError(f"magnitude must be nonnegative, got {magnitude}")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    direction = rng.uniform(-1.0, 1.0, size=shape)
    if magnitude == 0:
        return np.zeros(shape)
    return direction * (magnitude / np.max(np.abs(direction)))


def write_dataset(path, data: Dataset) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x1", "x2", "y"])
    for (x1, x2), label in zip(data.X, data.y):
        writer.writerow([repr(float(x1)), repr(float(x2)), int(label)])
    atomic_write_text(path, buf.getvalue())


def read_dataset(path, split: str = "train", radius: float = 0.5) -> Dataset:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["x1", "x2", "y"]:
            raise ConfigError(f"{path}: expected header x1,x2,y, got {header}")
        rows = [row for row in reader if row]
    try:
        X = np.array([[float(a), float(b)] for a, b, _ in rows]).reshape(-1, 2)
        y = np.array([float(c) for _, _, c in rows])
    except ValueError as exc:
        raise ConfigError(f"{path}: malformed row") from exc
    if len(y) == 0:
        raise ConfigError(f"{path}: no data rows")
    return Dataset(X, y, split, None, radius)
