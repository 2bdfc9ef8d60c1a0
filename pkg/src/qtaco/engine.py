"""Run-time barren plateau monitoring.

Three pieces: a structure extractor over the parameter registry, a
sliding-window gradient-variance estimator, and a feedback generator that
renders flagged parameters as text lines.

A parameter is flagged at an epoch when its window variance ``v`` satisfies
any of

* ``v < tau_abs`` (absolute floor),
* ``baseline > 0 and v / baseline < tau_rel`` (baseline is the variance of
  the first full window),
* ``v < drop_ratio * median(previous windows)`` over up to five earlier
  window variances.

All variances use the population (divide-by-N) convention.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import asdict, dataclass, field

import numpy as np

from .sim import ROTATION_KINDS
from .vqc import ParameterDescriptor, VqcStructure, named_parameters

ALL = "ALL"
RESTRUCTURE_HINT = "reduce_layers"
MEDIAN_HISTORY = 5


def format_value(x: float) -> str:
    """Lowercase scientific notation rounded to 6 significant digits, trailing zeros dropped.

    >>> format_value(3.2e-9)
    '3.2e-9'
    >>> format_value(0.123456789)
    '1.23457e-1'
    """
    x = float(x)
    if not math.isfinite(x):
        return str(x).lower()
    mantissa, exponent = f"{x:.5e}".split("e")
    if "." in mantissa:
        mantissa = mantissa.rstrip("0").rstrip(".")
    return f"{mantissa}e{int(exponent)}"


@dataclass(frozen=True)
class EstimatorSettings:
    window: int = 10
    tau_abs: float = 1e-9
    tau_rel: float = 1e-4
    drop_ratio: float = 1e-2

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be a positive integer")
        for name in ("tau_abs", "tau_rel", "drop_ratio"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> EstimatorSettings:
        return cls(
            window=int(data.get("window", 10)),
            tau_abs=float(data.get("tau_abs", 1e-9)),
            tau_rel=float(data.get("tau_rel", 1e-4)),
            drop_ratio=float(data.get("drop_ratio", 1e-2)),
        )


@dataclass(frozen=True)
class StructureReport:
    n_params: int
    gate_counts: dict[str, int]
    descriptors: tuple[ParameterDescriptor, ...]
    n_entanglers: int

    def to_dict(self) -> dict:
        return {
            "n_params": self.n_params,
            "gate_counts": dict(self.gate_counts),
            "n_entanglers": self.n_entanglers,
            "parameters": [asdict(d) for d in self.descriptors],
        }


def extract_structure(vqc: VqcStructure) -> StructureReport:
    descriptors = named_parameters(vqc)
    counts = Counter(d.gate_kind for d in descriptors)
    return StructureReport(
        n_params=len(descriptors),
        gate_counts={k: counts[k] for k in ROTATION_KINDS if counts[k]},
        descriptors=descriptors,
        n_entanglers=sum(len(layer.entanglers) for layer in vqc.layers),
    )


def population_variance(values, axis=0) -> np.ndarray:
    """Divide-by-N variance, two-pass on data shifted by its first sample.

    The shift makes constant input give exactly zero.
    """
    values = np.asarray(values, dtype=np.float64)
    shifted = values - np.take(values, [0], axis=axis)
    centered = shifted - shifted.mean(axis=axis, keepdims=True)
    return np.mean(centered * centered, axis=axis)


def gate_type_variance(gradient, descriptors) -> dict[str, float]:
    """Population variance of the gradient entries grouped by rotation kind."""
    gradient = np.asarray(gradient, dtype=np.float64)
    if gradient.shape != (len(descriptors),):
        raise ValueError(f"gradient length {gradient.shape} does not match {len(descriptors)} descriptors")
    out = {}
    for kind in ROTATION_KINDS:
        idx = [d.index for d in descriptors if d.gate_kind == kind]
        if idx:
            out[kind] = float(population_variance(gradient[idx]))
    return out


@dataclass(frozen=True)
class BarrenPlateauReport:
    epoch: int
    per_param_variance: np.ndarray | None  # None during warm-up
    flags: np.ndarray
    per_gate_type_variance: dict[str, float]

    @property
    def all_flagged(self) -> bool:
        return bool(self.flags.size) and bool(np.all(self.flags))

    @property
    def warming_up(self) -> bool:
        return self.per_param_variance is None


@dataclass(frozen=True)
class FeedbackMessage:
    epoch: int
    parameter_index: int | str
    parameter_type: str
    bp_value: float

    @property
    def text(self) -> str:
        line = (
            f"[BP] epoch={self.epoch} param={self.parameter_index} "
            f"type={self.parameter_type} value={format_value(self.bp_value)}"
        )
        if self.parameter_index == ALL:
            line += f" hint={RESTRUCTURE_HINT}"
        return line


@dataclass
class BarrenPlateauEstimator:
    """Single-writer estimator state; feed one gradient vector per epoch in order."""

    n_params: int
    settings: EstimatorSettings = field(default_factory=EstimatorSettings)

    def __post_init__(self):
        self._window = deque(maxlen=self.settings.window)
        self._history = deque(maxlen=MEDIAN_HISTORY)
        self.baseline: np.ndarray | None = None
        self.last_epoch: int | None = None

    def update(self, epoch: int, gradient, descriptors) -> BarrenPlateauReport:
        gradient = np.asarray(gradient, dtype=np.float64)
        if gradient.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} gradients, got shape {gradient.shape}")
        if self.last_epoch is not None and epoch <= self.last_epoch:
            raise ValueError(f"epoch {epoch} does not follow epoch {self.last_epoch}")
        self.last_epoch = epoch
        self._window.append(gradient.copy())
        by_kind = gate_type_variance(gradient, descriptors)

        if len(self._window) < self.settings.window:
            return BarrenPlateauReport(epoch, None, np.zeros(self.n_params, dtype=bool), by_kind)

        variance = population_variance(np.stack(self._window), axis=0)
        if self.baseline is None:
            self.baseline = variance
        s = self.settings
        flags = variance < s.tau_abs
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(self.baseline > 0, variance / self.baseline, np.inf)
        flags |= rel < s.tau_rel
        if self._history:
            flags |= variance < s.drop_ratio * np.median(np.stack(self._history), axis=0)
        self._history.append(variance)
        return BarrenPlateauReport(epoch, variance, flags, by_kind)


def update_estimator(
    state: BarrenPlateauEstimator, epoch: int, gradient, descriptors
) -> BarrenPlateauReport:
    return state.update(epoch, gradient, descriptors)


def generate_feedback(report: BarrenPlateauReport, descriptors) -> list[FeedbackMessage]:
    """One message per flagged parameter, plus an ``ALL`` message when every parameter is flagged.

    The ``ALL`` message carries the largest flagged window variance.
    """
    if report.warming_up or not report.flags.any():
        return []
    messages = [
        FeedbackMessage(report.epoch, d.index, d.gate_kind, float(report.per_param_variance[d.index]))
        for d in descriptors
        if report.flags[d.index]
    ]
    if report.all_flagged:
        messages.append(FeedbackMessage(report.epoch, ALL, ALL, float(np.max(report.per_param_variance))))
    return messages
