"""Gradient-descent training loop with per-epoch telemetry.

Every epoch's :class:`EpochRecord` is delivered to the sinks before the
next epoch's gradient is computed, so monitors observe the run as it
happens.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .data import Dataset, load_or_make
from .engine import EstimatorSettings
from .grad import loss, parameter_shift_gradient, predictions
from .vqc import VqcStructure, build_vqc


class TrainingDivergedError(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainingConfig:
    n_wires: int = 2
    n_layers: int = 2
    structure_seed: int = 0
    param_init_seed: int = 1
    dataset_seed: int = 2
    epochs: int = 50
    learning_rate: float = 0.1
    batch_size: int | None = None  # None trains full-batch
    n_train: int = 64
    n_test: int = 64
    estimator: EstimatorSettings = field(default_factory=EstimatorSettings)
    train_csv: str | None = None
    test_csv: str | None = None

    def __post_init__(self):
        for name in ("n_wires", "n_layers", "epochs", "n_train", "n_test"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        for name in ("structure_seed", "param_init_seed", "dataset_seed"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 0:
                raise ValueError(f"{name} must be an unsigned integer, got {value!r}")
        if self.batch_size is not None and (not isinstance(self.batch_size, int) or self.batch_size < 1):
            raise ValueError(f"batch_size must be a positive integer or null, got {self.batch_size!r}")
        if not (math.isfinite(self.learning_rate) and self.learning_rate > 0):
            raise ValueError(f"learning_rate must be positive and finite, got {self.learning_rate}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["estimator"] = self.estimator.to_dict()
        return d

    @classmethod
    def from_dict(cls, data: dict) -> TrainingConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "estimator" in kwargs:
            kwargs["estimator"] = EstimatorSettings.from_dict(kwargs["estimator"])
        if "learning_rate" in kwargs:
            kwargs["learning_rate"] = float(kwargs["learning_rate"])
        return cls(**kwargs)

    @classmethod
    def load(cls, path) -> TrainingConfig:
        """Read a config JSON, or the ``config`` section of a run manifest."""
        data = json.loads(Path(path).read_text())
        if "config" in data and isinstance(data["config"], dict):
            data = data["config"]
        return cls.from_dict(data)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    test_accuracy: float
    gradient: np.ndarray  # dL/dtheta at the pre-update parameters
    params: np.ndarray  # parameters after this epoch's update


def evaluate(vqc: VqcStructure, params, dataset: Dataset) -> float:
    """Fraction of samples where sign(<Z_0>) matches the label; sign(0) counts as +1."""
    if len(dataset) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    z = predictions(vqc, params, dataset.features)
    predicted = np.where(z >= 0, 1.0, -1.0)
    return float(np.mean(predicted == dataset.labels))


def initial_params(n_params: int, seed: int) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, 0x1A17])))
    return rng.uniform(-math.pi, math.pi, size=n_params)


def _epoch_batch(train: Dataset, config: TrainingConfig, epoch: int) -> Dataset:
    if config.batch_size is None or config.batch_size >= len(train):
        return train
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([config.param_init_seed, 0xBA7C, epoch])))
    return train.subset(rng.permutation(len(train))[: config.batch_size])


def prepare(config: TrainingConfig) -> tuple[VqcStructure, Dataset, Dataset]:
    vqc = build_vqc(config.n_wires, config.n_layers, config.structure_seed)
    if config.train_csv is None and config.test_csv is None:
        both = load_or_make(None, config.n_wires, config.n_train + config.n_test, config.dataset_seed)
        idx = np.arange(len(both))
        return vqc, both.subset(idx[: config.n_train]), both.subset(idx[config.n_train :])
    train = load_or_make(config.train_csv, config.n_wires, config.n_train, config.dataset_seed)
    test = load_or_make(config.test_csv, config.n_wires, config.n_test, config.dataset_seed + 1)
    return vqc, train, test


def train(
    config: TrainingConfig,
    sinks: Iterable[Callable[[EpochRecord], None]] = (),
    vqc: VqcStructure | None = None,
    datasets: tuple[Dataset, Dataset] | None = None,
) -> list[EpochRecord]:
    """Run plain gradient descent for ``config.epochs`` epochs.

    ``vqc`` and ``datasets`` override what the config would build.
    """
    sinks = list(sinks)
    if vqc is None or datasets is None:
        built_vqc, *built_sets = prepare(config)
        vqc = vqc or built_vqc
        datasets = datasets or tuple(built_sets)
    train_set, test_set = datasets
    params = initial_params(vqc.n_params, config.param_init_seed)
    records = []
    for epoch in range(1, config.epochs + 1):
        batch = _epoch_batch(train_set, config, epoch)
        gradient = parameter_shift_gradient(vqc, params, batch)
        bad = np.flatnonzero(~np.isfinite(gradient))
        if bad.size:
            raise TrainingDivergedError(f"epoch {epoch}: non-finite gradient for parameter {int(bad[0])}")
        params = params - config.learning_rate * gradient
        train_loss = loss(vqc, params, train_set)
        if not math.isfinite(train_loss):
            raise TrainingDivergedError(f"epoch {epoch}: non-finite training loss")
        record = EpochRecord(epoch, train_loss, evaluate(vqc, params, test_set), gradient, params.copy())
        for sink in sinks:
            sink(record)
        records.append(record)
    return records
