"""Training loss and its gradient by the parameter-shift rule.

Loss is the mean squared error between ``<Z_0>`` and the +/-1 label. The
classifier output is the first measured wire, which is wire 0 for the
default structures.
"""

from __future__ import annotations

import math

import numpy as np

from .data import Dataset
from .vqc import VqcStructure, simulate

SHIFT = math.pi / 2


def _check_batch(vqc: VqcStructure, batch: Dataset) -> None:
    if len(batch) == 0:
        raise ValueError("batch must not be empty")
    if batch.n_features != vqc.n_wires:
        raise ValueError(f"batch has {batch.n_features} features, circuit has {vqc.n_wires} wires")


def _check_params(vqc: VqcStructure, params) -> np.ndarray:
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (vqc.n_params,):
        raise ValueError(f"expected {vqc.n_params} parameters, got shape {params.shape}")
    return params


def predictions(vqc: VqcStructure, params, features) -> np.ndarray:
    """Classifier output ``<Z_0>`` per sample."""
    return simulate(vqc, np.asarray(params, dtype=np.float64)[None, :], features)[0, :, 0]


def loss(vqc: VqcStructure, params, batch: Dataset) -> float:
    _check_batch(vqc, batch)
    params = _check_params(vqc, params)
    residual = predictions(vqc, params, batch.features) - batch.labels
    return float(np.mean(residual**2))


def shifted_params(params: np.ndarray, indices=None) -> np.ndarray:
    """Rows ``[theta, theta + s*e_k ..., theta - s*e_k ...]`` for each k in ``indices``."""
    p = params.shape[0]
    indices = np.arange(p) if indices is None else np.asarray(indices)
    m = len(indices)
    rows = np.tile(params, (1 + 2 * m, 1))
    rows[1 + np.arange(m), indices] += SHIFT
    rows[1 + m + np.arange(m), indices] -= SHIFT
    return rows


def parameter_shift_gradient(vqc: VqcStructure, params, batch: Dataset) -> np.ndarray:
    """Exact dL/dtheta.

    Each sample costs 2P shifted circuit evaluations plus the unshifted one
    needed for the residual. All of them run in a single vectorized call.
    """
    _check_batch(vqc, batch)
    params = _check_params(vqc, params)
    p = vqc.n_params
    if p == 0:
        return np.zeros(0)
    z = simulate(vqc, shifted_params(params), batch.features)[:, :, 0]
    dz = (z[1 : 1 + p] - z[1 + p :]) / 2  # (P, B)
    residual = z[0] - batch.labels
    return np.mean(2 * residual[None, :] * dz, axis=1)


def expectation_shift_gradient(vqc: VqcStructure, params, features, index: int, wire_slot: int = 0) -> float:
    """d<Z>/dtheta_index for one sample, where ``<Z>`` is measured wire ``wire_slot``."""
    params = _check_params(vqc, params)
    if not 0 <= index < vqc.n_params:
        raise ValueError(f"parameter index {index} out of range")
    z = simulate(vqc, shifted_params(params, [index])[1:], np.asarray(features, dtype=np.float64)[None, :])
    return float((z[0, 0, wire_slot] - z[1, 0, wire_slot]) / 2)


def finite_difference_gradient(vqc: VqcStructure, params, batch: Dataset, h: float = 1e-3) -> np.ndarray:
    """Central differences of :func:`loss`; the verification oracle for the shift rule."""
    if not h > 0:
        raise ValueError("step h must be positive")
    params = _check_params(vqc, params)
    grad = np.zeros(vqc.n_params)
    for k in range(vqc.n_params):
        up = params.copy()
        up[k] += h
        down = params.copy()
        down[k] -= h
        grad[k] = (loss(vqc, up, batch) - loss(vqc, down, batch)) / (2 * h)
    return grad
