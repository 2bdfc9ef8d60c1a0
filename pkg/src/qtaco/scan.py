"""Gradient-variance scaling across qubit counts for random circuits.

For each qubit count ``n``: sample random structures with
``n * layers_per_qubit`` layers and uniform parameters in [-pi, pi], take
d<Z_0>/dtheta_0 by the shift rule, and record the population variance
across samples. Exponential decay of that variance with ``n`` is the
barren plateau signature.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .engine import format_value
from .grad import expectation_shift_gradient
from .vqc import build_vqc

CSV_HEADER = ("n_qubits", "n_layers", "n_samples", "variance", "stderr")


@dataclass(frozen=True)
class VarianceRow:
    n_qubits: int
    n_layers: int
    n_samples: int
    variance: float
    stderr: float


def _sample_seeds(seed: int, n_qubits: int, sample: int) -> tuple[int, np.random.Generator]:
    ss = np.random.SeedSequence([seed, n_qubits, sample])
    structure_ss, param_ss = ss.spawn(2)
    structure_seed = int(structure_ss.generate_state(1, dtype=np.uint32)[0])
    return structure_seed, np.random.Generator(np.random.Philox(param_ss))


def sample_gradients(n_qubits: int, n_layers: int, n_samples: int, seed: int) -> np.ndarray:
    """Shift-rule gradients of <Z_0> w.r.t. parameter 0, one per random circuit."""
    grads = np.empty(n_samples)
    zeros = np.zeros(n_qubits)
    for s in range(n_samples):
        structure_seed, rng = _sample_seeds(seed, n_qubits, s)
        vqc = build_vqc(n_qubits, n_layers, structure_seed)
        params = rng.uniform(-math.pi, math.pi, size=vqc.n_params)
        grads[s] = expectation_shift_gradient(vqc, params, zeros, 0)
    return grads


def variance_stderr(samples: np.ndarray) -> tuple[float, float]:
    """Population variance and its large-sample standard error sqrt((m4 - var^2) / N)."""
    centered = samples - samples.mean()
    var = float(np.mean(centered**2))
    m4 = float(np.mean(centered**4))
    return var, math.sqrt(max(m4 - var * var, 0.0) / len(samples))


def variance_scaling_experiment(qubit_counts, layers_per_qubit: int, n_samples: int, seed: int) -> list[VarianceRow]:
    qubit_counts = list(qubit_counts)
    if not qubit_counts:
        raise ValueError("need at least one qubit count")
    if any(n < 2 for n in qubit_counts):
        raise ValueError(f"qubit counts must be >= 2, got {qubit_counts}")
    if layers_per_qubit < 1:
        raise ValueError("layers_per_qubit must be >= 1")
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    table = []
    for n in qubit_counts:
        n_layers = n * layers_per_qubit
        var, err = variance_stderr(sample_gradients(n, n_layers, n_samples, seed))
        table.append(VarianceRow(n, n_layers, n_samples, var, err))
    return table


def fit_log_slope(table) -> float:
    """Least-squares slope of ln(variance) against qubit count."""
    rows = list(table)
    if len(rows) < 3:
        raise ValueError(f"need at least 3 rows to fit, got {len(rows)}")
    if any(not row.variance > 0 for row in rows):
        raise ValueError("every row needs a positive variance")
    x = np.array([row.n_qubits for row in rows], dtype=np.float64)
    y = np.log([row.variance for row in rows])
    slope, _ = np.polyfit(x, y, 1)
    return float(slope)


def write_variance_csv(table, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in table:
            writer.writerow(
                [row.n_qubits, row.n_layers, row.n_samples, format_value(row.variance), format_value(row.stderr)]
            )
