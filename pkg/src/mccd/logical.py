"""Logical circuits, mirror-circuit sampling and text serialization."""

from __future__ import annotations

import re
from dataclasses import dataclass

import numpy as np

SINGLE_QUBIT_GATES = ("I", "X", "Y", "Z", "H")
GATE_KINDS = SINGLE_QUBIT_GATES + ("CNOT",)


class CircuitError(ValueError):
    pass


@dataclass(frozen=True)
class LogicalGate:
    kind: str
    operands: tuple[int, ...]

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise CircuitError(f"unknown gate kind {self.kind!r}")
        want = 2 if self.kind == "CNOT" else 1
        if len(self.operands) != want:
            raise CircuitError(f"{self.kind} takes {want} operand(s), got {self.operands}")
        if self.kind == "CNOT" and self.operands[0] == self.operands[1]:
            raise CircuitError("CNOT control and target must differ")

    def __str__(self) -> str:
        return f"{self.kind}@{','.join(map(str, self.operands))}"


@dataclass(frozen=True)
class LogicalCircuit:
    num_qubits: int
    layers: tuple[tuple[LogicalGate, ...], ...]
    circuit_type: str = "I"

    def __post_init__(self):
        if self.num_qubits < 1:
            raise CircuitError("need at least one logical qubit")
        for t, layer in enumerate(self.layers):
            seen: list[int] = []
            for g in layer:
                seen.extend(g.operands)
            if sorted(seen) != list(range(self.num_qubits)):
                raise CircuitError(f"layer {t} does not cover every qubit exactly once: {layer}")

    @property
    def depth(self) -> int:
        return len(self.layers)

    def gate_on(self, t: int, q: int) -> LogicalGate:
        for g in self.layers[t]:
            if q in g.operands:
                return g
        raise CircuitError(f"qubit {q} idle in layer {t}")

    def is_mirror(self) -> bool:
        D = self.depth
        return all(
            _canonical(self.layers[t]) == _canonical(self.layers[D - 1 - t]) for t in range(D)
        )

    def to_text(self) -> str:
        lines = [f"Q={self.num_qubits} D={self.depth} TYPE={self.circuit_type}"]
        for layer in self.layers:
            lines.append(" ".join(str(g) for g in layer))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "LogicalCircuit":
        lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
        if not lines:
            raise CircuitError("empty circuit text")
        m = re.fullmatch(r"Q=(\d+)\s+D=(\d+)\s+TYPE=(I|II)", lines[0])
        if not m:
            raise CircuitError(f"bad header line {lines[0]!r}")
        q, depth, ctype = int(m.group(1)), int(m.group(2)), m.group(3)
        layers = []
        for ln in lines[1:]:
            gates = []
            for tok in ln.split():
                km = re.fullmatch(r"([A-Z]+)@(\d+(?:,\d+)?)", tok)
                if not km:
                    raise CircuitError(f"bad gate token {tok!r}")
                gates.append(LogicalGate(km.group(1), tuple(int(v) for v in km.group(2).split(","))))
            layers.append(tuple(gates))
        if len(layers) != depth:
            raise CircuitError(f"header says D={depth} but found {len(layers)} layers")
        return cls(q, tuple(layers), ctype)


def _canonical(layer):
    # every gate in the set is self-inverse, so inverse(layer) == layer
    return tuple(sorted((g.kind, g.operands) for g in layer))


def _one_qubit_layer(num_qubits: int, rng: np.random.Generator) -> tuple[LogicalGate, ...]:
    picks = rng.integers(0, len(SINGLE_QUBIT_GATES), size=num_qubits)
    return tuple(LogicalGate(SINGLE_QUBIT_GATES[k], (q,)) for q, k in enumerate(picks))


def _cnot_layer(num_qubits: int, rng: np.random.Generator) -> tuple[LogicalGate, ...]:
    perm = rng.permutation(num_qubits)
    gates = []
    for a, b in zip(perm[0::2], perm[1::2]):
        gates.append(LogicalGate("CNOT", (int(a), int(b))))
    return tuple(sorted(gates, key=lambda g: g.operands))


def sample_mirror(circuit_type: str, num_qubits: int, depth: int, rng: np.random.Generator) -> LogicalCircuit:
    """Random mirror circuit: a forward half followed by its reverse.

    Type I forward layers are independent random single-qubit layers.  Type
    II forward layers alternate single-qubit and CNOT layers, starting with
    a single-qubit layer; each CNOT layer is a random perfect matching with
    random control/target orientation.
    """
    if depth < 2 or depth % 2:
        raise CircuitError(f"mirror depth must be even and >= 2, got {depth}")
    half = depth // 2
    if circuit_type == "I":
        forward = [_one_qubit_layer(num_qubits, rng) for _ in range(half)]
    elif circuit_type == "II":
        if depth % 4:
            raise CircuitError(f"Type II depth must be a multiple of 4, got {depth}")
        if num_qubits < 2 or num_qubits % 2:
            raise CircuitError(f"Type II needs an even number of qubits >= 2, got {num_qubits}")
        forward = []
        for t in range(half):
            forward.append(_one_qubit_layer(num_qubits, rng) if t % 2 == 0 else _cnot_layer(num_qubits, rng))
    else:
        raise CircuitError(f"unknown circuit type {circuit_type!r}")
    layers = forward + forward[::-1]
    return LogicalCircuit(num_qubits, tuple(layers), circuit_type)


def mirror_of(forward: list[list[str]], circuit_type: str = "I") -> LogicalCircuit:
    """Build a single-qubit-per-layer mirror circuit from gate names.

    ``forward[t][q]`` names the gate on qubit ``q`` in layer ``t``.
    """
    layers = []
    for names in forward:
        layers.append(tuple(LogicalGate(name, (q,)) for q, name in enumerate(names)))
    layers = layers + layers[::-1]
    return LogicalCircuit(len(forward[0]), tuple(layers), circuit_type)
