"""Exact statevector simulation for small qubit registers.

Basis convention: basis index ``b`` stores wire 0 in its least-significant
bit, so ``|q_{n-1} ... q_1 q_0>`` maps to ``b = sum(q_w << w)``.

The kernels below operate on arrays of shape ``(..., 2**n)`` so the same
code path serves a single :class:`StateVector` and batched evaluation of
many circuits at once.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_QUBITS = 20

ROTATION_KINDS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATION_KINDS + ("CNOT",)


@dataclass
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (1 << self.n_qubits,):
            raise ValueError(
                f"expected {1 << self.n_qubits} amplitudes for {self.n_qubits} qubits, "
                f"got shape {self.amplitudes.shape}"
            )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class GateInstance:
    """One gate application: a rotation on ``wire`` or a CNOT ``control -> wire``."""

    kind: str
    wire: int
    angle: float = 0.0
    control: int | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if self.kind == "CNOT":
            if self.control is None:
                raise ValueError("CNOT needs a control wire")
            if self.control == self.wire:
                raise ValueError("CNOT control and target must differ")
        elif not math.isfinite(self.angle):
            raise ValueError(f"rotation angle must be finite, got {self.angle}")

    def wires(self) -> tuple[int, ...]:
        if self.kind == "CNOT":
            return (self.control, self.wire)
        return (self.wire,)


def _check_wire(wire, n_qubits: int) -> None:
    if not isinstance(wire, (int, np.integer)) or not 0 <= wire < n_qubits:
        raise ValueError(f"wire {wire!r} out of range for {n_qubits} qubits")


def init_state(n_qubits: int) -> StateVector:
    """Return ``|0...0>`` on ``n_qubits`` wires."""
    if not isinstance(n_qubits, (int, np.integer)) or not 1 <= n_qubits <= MAX_QUBITS:
        raise ValueError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits!r}")
    amps = np.zeros(1 << n_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(int(n_qubits), amps)


def rotation_matrix(kind: str, angle) -> np.ndarray:
    """2x2 rotation matrices; ``angle`` may be an array, giving shape ``angle.shape + (2, 2)``."""
    theta = np.asarray(angle, dtype=np.float64)
    c = np.cos(theta / 2)
    s = np.sin(theta / 2)
    out = np.empty(theta.shape + (2, 2), dtype=np.complex128)
    if kind == "RX":
        out[..., 0, 0] = c
        out[..., 0, 1] = -1j * s
        out[..., 1, 0] = -1j * s
        out[..., 1, 1] = c
    elif kind == "RY":
        out[..., 0, 0] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        out[..., 1, 1] = c
    elif kind == "RZ":
        out[..., 0, 0] = np.exp(-0.5j * theta)
        out[..., 0, 1] = 0.0
        out[..., 1, 0] = 0.0
        out[..., 1, 1] = np.exp(0.5j * theta)
    else:
        raise ValueError(f"not a rotation kind: {kind!r}")
    return out


def apply_single_qubit(amps: np.ndarray, matrix: np.ndarray, wire: int, n_qubits: int) -> np.ndarray:
    """Apply a 2x2 ``matrix`` to ``wire`` by strided pair updates.

    ``matrix`` has shape ``lead + (2, 2)`` where ``lead`` broadcasts against
    ``amps.shape[:-1]``. Returns a new array.
    """
    lead = amps.shape[:-1]
    v = amps.reshape(lead + (1 << (n_qubits - 1 - wire), 2, 1 << wire))
    a0 = v[..., 0, :]
    a1 = v[..., 1, :]
    m = matrix[..., None, None]  # broadcast over the (high, low) index blocks
    out = np.empty_like(v)
    out[..., 0, :] = m[..., 0, 0, :, :] * a0 + m[..., 0, 1, :, :] * a1
    out[..., 1, :] = m[..., 1, 0, :, :] * a0 + m[..., 1, 1, :, :] * a1
    return out.reshape(amps.shape)


@lru_cache(maxsize=256)
def _cnot_permutation(control: int, target: int, n_qubits: int) -> np.ndarray:
    idx = np.arange(1 << n_qubits)
    flip = (idx >> control) & 1
    return idx ^ (flip << target)


def apply_cnot(amps: np.ndarray, control: int, target: int, n_qubits: int) -> np.ndarray:
    return amps[..., _cnot_permutation(control, target, n_qubits)]


def apply_gate(state: StateVector, gate: GateInstance) -> StateVector:
    """Return the state after ``gate`` acts on it. The input is not modified."""
    n = state.n_qubits
    for w in gate.wires():
        _check_wire(w, n)
    if gate.kind == "CNOT":
        amps = apply_cnot(state.amplitudes, gate.control, gate.wire, n)
    else:
        amps = apply_single_qubit(state.amplitudes, rotation_matrix(gate.kind, gate.angle), gate.wire, n)
    return StateVector(n, amps)


def apply_gates(state: StateVector, gates) -> StateVector:
    for gate in gates:
        state = apply_gate(state, gate)
    return state


def z_expectations(amps: np.ndarray, wire: int, n_qubits: int) -> np.ndarray:
    """<Z_wire> over the trailing axis of ``amps``: P(bit=0) - P(bit=1)."""
    lead = amps.shape[:-1]
    probs = (amps.real**2 + amps.imag**2).reshape(lead + (1 << (n_qubits - 1 - wire), 2, 1 << wire))
    p0 = probs[..., 0, :].sum(axis=(-2, -1))
    p1 = probs[..., 1, :].sum(axis=(-2, -1))
    return np.clip(p0 - p1, -1.0, 1.0)


def expectation_z(state: StateVector, wire: int) -> float:
    _check_wire(wire, state.n_qubits)
    return float(z_expectations(state.amplitudes, wire, state.n_qubits))
