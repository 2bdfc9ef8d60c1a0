"""Variational circuit structure: angle encoder, random rotation layers, Z readout."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .sim import (
    ROTATION_KINDS,
    GateInstance,
    StateVector,
    apply_cnot,
    apply_gates,
    apply_single_qubit,
    init_state,
    rotation_matrix,
    z_expectations,
)


def layer_rng(seed: int, layer: int, wire: int) -> np.random.Generator:
    """Counter-based Philox stream keyed by ``(seed, layer, wire)``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, layer, wire])))


def ring_entanglers(n_wires: int) -> tuple[tuple[int, int], ...]:
    if n_wires < 2:
        return ()
    return tuple((i, (i + 1) % n_wires) for i in range(n_wires))


@dataclass(frozen=True)
class Layer:
    rotations: tuple[str, ...]  # gate kind per wire
    entanglers: tuple[tuple[int, int], ...]  # (control, target)


@dataclass(frozen=True)
class ParameterDescriptor:
    index: int
    layer: int
    wire: int
    gate_kind: str


@dataclass(frozen=True)
class VqcStructure:
    n_wires: int
    layers: tuple[Layer, ...]
    measured_wires: tuple[int, ...]
    seed: int = 0
    _descriptors: tuple[ParameterDescriptor, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_wires < 1:
            raise ValueError("n_wires must be >= 1")
        if not self.measured_wires:
            raise ValueError("at least one wire must be measured")
        if len(set(self.measured_wires)) != len(self.measured_wires):
            raise ValueError(f"measured wires must be distinct: {self.measured_wires}")
        for w in self.measured_wires:
            if not 0 <= w < self.n_wires:
                raise ValueError(f"measured wire {w} out of range")
        for li, layer in enumerate(self.layers):
            if len(layer.rotations) != self.n_wires:
                raise ValueError(f"layer {li} has {len(layer.rotations)} rotations, expected {self.n_wires}")
            for kind in layer.rotations:
                if kind not in ROTATION_KINDS:
                    raise ValueError(f"layer {li}: bad rotation kind {kind!r}")
            for c, t in layer.entanglers:
                if c == t or not (0 <= c < self.n_wires and 0 <= t < self.n_wires):
                    raise ValueError(f"layer {li}: bad entangler ({c}, {t})")
        descriptors = tuple(
            ParameterDescriptor(li * self.n_wires + w, li, w, kind)
            for li, layer in enumerate(self.layers)
            for w, kind in enumerate(layer.rotations)
        )
        object.__setattr__(self, "_descriptors", descriptors)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def n_params(self) -> int:
        return self.n_wires * self.n_layers

    def to_dict(self) -> dict:
        return {
            "n_wires": self.n_wires,
            "n_layers": self.n_layers,
            "seed": self.seed,
            "layers": [
                {"rotations": list(layer.rotations), "entanglers": [list(p) for p in layer.entanglers]}
                for layer in self.layers
            ],
            "measured_wires": list(self.measured_wires),
        }

    @classmethod
    def from_dict(cls, data: dict) -> VqcStructure:
        layers = tuple(
            Layer(tuple(d["rotations"]), tuple((int(c), int(t)) for c, t in d["entanglers"]))
            for d in data["layers"]
        )
        if "n_layers" in data and data["n_layers"] != len(layers):
            raise ValueError("n_layers disagrees with the layer list")
        return cls(int(data["n_wires"]), layers, tuple(data["measured_wires"]), int(data.get("seed", 0)))

    @classmethod
    def from_rotation_kinds(cls, kinds, measured_wires=None, seed: int = 0) -> VqcStructure:
        """Build a structure with fixed rotation kinds (one row per layer) and ring entanglers."""
        kinds = [tuple(row) for row in kinds]
        if not kinds:
            raise ValueError("need at least one layer to infer n_wires")
        n_wires = len(kinds[0])
        layers = tuple(Layer(row, ring_entanglers(n_wires)) for row in kinds)
        measured = tuple(range(n_wires)) if measured_wires is None else tuple(measured_wires)
        return cls(n_wires, layers, measured, seed)


def build_vqc(n_wires: int, n_layers: int, seed: int, measured_wires=None) -> VqcStructure:
    """Random-layer circuit: each rotation kind drawn uniformly from RX/RY/RZ."""
    if n_wires < 1 or n_layers < 1:
        raise ValueError(f"need n_wires >= 1 and n_layers >= 1, got {n_wires}, {n_layers}")
    if seed < 0:
        raise ValueError("seed must be unsigned")
    ent = ring_entanglers(n_wires)
    layers = tuple(
        Layer(tuple(ROTATION_KINDS[int(layer_rng(seed, li, w).integers(3))] for w in range(n_wires)), ent)
        for li in range(n_layers)
    )
    measured = tuple(range(n_wires)) if measured_wires is None else tuple(measured_wires)
    return VqcStructure(n_wires, layers, measured, seed)


def named_parameters(vqc: VqcStructure) -> tuple[ParameterDescriptor, ...]:
    """Descriptors in global index order (layer-major, wire ascending)."""
    return vqc._descriptors


def encode(features, n_wires: int) -> list[GateInstance]:
    """Angle encoding: ``RY(features[i])`` on wire ``i``."""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (n_wires,):
        raise ValueError(f"expected {n_wires} features, got shape {features.shape}")
    if not np.all(np.isfinite(features)):
        raise ValueError("features must be finite")
    return [GateInstance("RY", i, float(x)) for i, x in enumerate(features)]


def circuit_gates(vqc: VqcStructure, params) -> list[GateInstance]:
    """The parameterized part of the circuit as a flat gate list."""
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (vqc.n_params,):
        raise ValueError(f"expected {vqc.n_params} parameters, got shape {params.shape}")
    gates = []
    for li, layer in enumerate(vqc.layers):
        for w, kind in enumerate(layer.rotations):
            gates.append(GateInstance(kind, w, float(params[li * vqc.n_wires + w])))
        gates.extend(GateInstance("CNOT", t, control=c) for c, t in layer.entanglers)
    return gates


def simulate(vqc: VqcStructure, params, features) -> np.ndarray:
    """Vectorized forward pass.

    ``params`` has shape ``(K, P)`` and ``features`` shape ``(B, n_wires)``;
    returns ``<Z_w>`` for every measured wire with shape ``(K, B, len(measured_wires))``.
    All K*B circuits are evaluated together.
    """
    params = np.asarray(params, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    n = vqc.n_wires
    if params.ndim != 2 or params.shape[1] != vqc.n_params:
        raise ValueError(f"params must have shape (K, {vqc.n_params}), got {params.shape}")
    if features.ndim != 2 or features.shape[1] != n:
        raise ValueError(f"features must have shape (B, {n}), got {features.shape}")
    if not (np.all(np.isfinite(params)) and np.all(np.isfinite(features))):
        raise ValueError("params and features must be finite")
    k, b = params.shape[0], features.shape[0]

    amps = np.zeros((b, 1 << n), dtype=np.complex128)
    amps[:, 0] = 1.0
    for w in range(n):
        amps = apply_single_qubit(amps, rotation_matrix("RY", features[:, w]), w, n)
    amps = np.broadcast_to(amps, (k, b, 1 << n))
    for li, layer in enumerate(vqc.layers):
        for w, kind in enumerate(layer.rotations):
            mats = rotation_matrix(kind, params[:, li * n + w])[:, None]  # (K, 1, 2, 2)
            amps = apply_single_qubit(amps, mats, w, n)
        for c, t in layer.entanglers:
            amps = apply_cnot(amps, c, t, n)
    return np.stack([z_expectations(amps, w, n) for w in vqc.measured_wires], axis=-1)


def forward(vqc: VqcStructure, params, features) -> np.ndarray:
    """Expectations ``<Z_w>`` on the measured wires for one parameter/feature vector."""
    params = np.asarray(params, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    if params.shape != (vqc.n_params,):
        raise ValueError(f"expected {vqc.n_params} parameters, got shape {params.shape}")
    if features.shape != (vqc.n_wires,):
        raise ValueError(f"expected {vqc.n_wires} features, got shape {features.shape}")
    return simulate(vqc, params[None, :], features[None, :])[0, 0]


def forward_statevector(vqc: VqcStructure, params, features) -> StateVector:
    """Gate-by-gate reference path through :func:`qtaco.sim.apply_gate`."""
    state = init_state(vqc.n_wires)
    state = apply_gates(state, encode(features, vqc.n_wires))
    return apply_gates(state, circuit_gates(vqc, params))
