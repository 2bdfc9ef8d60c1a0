"""Binary-labelled datasets for the classifier head: synthetic generation and CSV I/O."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class DatasetParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray  # (N, n_wires)
    labels: np.ndarray  # (N,), values in {-1, +1}

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.float64)
        if features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {features.shape}")
        if labels.shape != (features.shape[0],):
            raise ValueError("one label per sample required")
        if not np.all(np.isin(labels, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @classmethod
    def from_samples(cls, samples) -> Dataset:
        samples = list(samples)
        if not samples:
            return cls(np.zeros((0, 0)), np.zeros(0))
        feats, labels = zip(*samples)
        return cls(np.array(feats, dtype=np.float64).reshape(len(samples), -1), np.array(labels, dtype=np.float64))

    def subset(self, index) -> Dataset:
        return Dataset(self.features[index], self.labels[index])


def threshold_labels(features: np.ndarray) -> np.ndarray:
    n = features.shape[1]
    return np.where(features.sum(axis=1) < n * math.pi / 2, 1.0, -1.0)


def make_synthetic_dataset(n_wires: int, n_samples: int, seed: int) -> Dataset:
    """Uniform features in [0, pi]^n with label +1 iff their sum is below n*pi/2."""
    if n_wires < 1:
        raise ValueError("n_wires must be >= 1")
    if n_samples < 2:
        raise ValueError(f"n_samples must be >= 2, got {n_samples}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0xDA7A])))
    features = rng.uniform(0.0, math.pi, size=(n_samples, n_wires))
    return Dataset(features, threshold_labels(features))


def write_dataset_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for x, y in zip(dataset.features, dataset.labels):
            writer.writerow([repr(float(v)) for v in x] + [str(int(y))])


def load_dataset_csv(path, has_header: bool = False) -> Dataset:
    """Read feature columns followed by a +/-1 label column.

    Any finite feature value is accepted and used as an angle.
    """
    rows, labels = [], []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if has_header and lineno == 1:
                continue
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise DatasetParseError(path, lineno, "need at least one feature and a label")
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DatasetParseError(path, lineno, f"expected {width} columns, got {len(row)}")
            try:
                values = [float(cell) for cell in row]
            except ValueError as exc:
                raise DatasetParseError(path, lineno, str(exc)) from None
            if not all(math.isfinite(v) for v in values):
                raise DatasetParseError(path, lineno, "non-finite value")
            if values[-1] not in (-1.0, 1.0):
                raise DatasetParseError(path, lineno, f"label must be -1 or +1, got {row[-1].strip()!r}")
            rows.append(values[:-1])
            labels.append(values[-1])
    if not rows:
        raise DatasetParseError(path, 0, "no samples")
    return Dataset(np.array(rows), np.array(labels))


def load_or_make(path: str | Path | None, n_wires: int, n_samples: int, seed: int) -> Dataset:
    if path is None:
        return make_synthetic_dataset(n_wires, n_samples, seed)
    ds = load_dataset_csv(path)
    if ds.n_features != n_wires:
        raise ValueError(f"{path}: {ds.n_features} feature columns but circuit has {n_wires} wires")
    return ds
