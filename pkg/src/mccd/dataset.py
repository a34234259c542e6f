"""Syndrome trajectories: construction from shot records, generation, file I/O.

File layout (little-endian)::

    magic   8 bytes  b"MCCDDAT1"
    version u32      1
    d       u32
    Q       u32
    D       u32
    count   u64
    count records, each:
        Q*D rows of detector bits, (d^2-1) bits packed LSB-first, row-padded to bytes
        Q rows of final-round bits, (d^2-1)/2 bits packed the same way
        label bits, Q bits packed into ceil(Q/8) bytes
        gate tags, Q*D u8 (q-major)
        CNOT partners, Q*D u8 (q-major, 255 when the gate is single-qubit)
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .compiler import DetectorMap, PhysicalCircuit, build_detector_map, compile_circuit
from .frame import ShotRecord, frame_sample, shot_rng
from .geometry import CodeLayout, build_layout
from .logical import LogicalCircuit, LogicalGate, sample_mirror
from .noise import NoiseModel

MAGIC = b"MCCDDAT1"
VERSION = 1
_HEADER = struct.Struct("<8sIIIIQ")

# gate tags, one per (qubit, layer)
TAG_CODES = {"I": 0, "X": 1, "Y": 2, "Z": 3, "H": 4, "CNOT_C": 5, "CNOT_T": 6}
TAG_NAMES = {v: k for k, v in TAG_CODES.items()}
TAG_PAD = 7  # padding step of a shorter trajectory inside a mixed-depth batch
NO_PARTNER = 255


class DatasetFormatError(ValueError):
    pass


class InconsistentCircuitError(ValueError):
    pass


def circuit_tags(circuit: LogicalCircuit) -> tuple[np.ndarray, np.ndarray]:
    """(tags, partners) arrays of shape (Q, D)."""
    Q, D = circuit.num_qubits, circuit.depth
    tags = np.zeros((Q, D), dtype=np.uint8)
    partners = np.full((Q, D), NO_PARTNER, dtype=np.uint8)
    for t, layer in enumerate(circuit.layers):
        for g in layer:
            if g.kind == "CNOT":
                c, tg = g.operands
                tags[c, t], partners[c, t] = TAG_CODES["CNOT_C"], tg
                tags[tg, t], partners[tg, t] = TAG_CODES["CNOT_T"], c
            else:
                tags[g.operands[0], t] = TAG_CODES[g.kind]
    return tags, partners


def circuit_from_tags(tags: np.ndarray, partners: np.ndarray, circuit_type: str = "I") -> LogicalCircuit:
    Q, D = tags.shape
    layers = []
    for t in range(D):
        layer = []
        for q in range(Q):
            name = TAG_NAMES[int(tags[q, t])]
            if name == "CNOT_C":
                layer.append(LogicalGate("CNOT", (q, int(partners[q, t]))))
            elif name != "CNOT_T":
                layer.append(LogicalGate(name, (q,)))
        layers.append(tuple(layer))
    return LogicalCircuit(Q, tuple(layers), circuit_type)


@dataclass
class SyndromeTrajectory:
    syndromes: np.ndarray  # (Q, D, d^2-1) bool
    final: np.ndarray  # (Q, (d^2-1)/2) bool
    labels: np.ndarray  # (Q,) bool
    tags: np.ndarray  # (Q, D) uint8
    partners: np.ndarray  # (Q, D) uint8

    @property
    def num_qubits(self) -> int:
        return self.syndromes.shape[0]

    @property
    def depth(self) -> int:
        return self.syndromes.shape[1]

    def circuit(self, circuit_type: str = "I") -> LogicalCircuit:
        return circuit_from_tags(self.tags, self.partners, circuit_type)


@dataclass
class TrajectoryBatch:
    """Trajectories stacked along a leading sample axis, homogeneous in (d, Q, D)."""

    d: int
    syndromes: np.ndarray  # (N, Q, D, ns)
    final: np.ndarray  # (N, Q, nz)
    labels: np.ndarray  # (N, Q)
    tags: np.ndarray  # (N, Q, D)
    partners: np.ndarray  # (N, Q, D)

    def __len__(self) -> int:
        return self.syndromes.shape[0]

    @property
    def num_qubits(self) -> int:
        return self.syndromes.shape[1]

    @property
    def depth(self) -> int:
        return self.syndromes.shape[2]

    def __getitem__(self, i):
        if isinstance(i, (int, np.integer)):
            return SyndromeTrajectory(self.syndromes[i], self.final[i], self.labels[i], self.tags[i], self.partners[i])
        return TrajectoryBatch(self.d, self.syndromes[i], self.final[i], self.labels[i], self.tags[i], self.partners[i])

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @classmethod
    def empty(cls, d: int, num_qubits: int, depth: int) -> "TrajectoryBatch":
        ns = d * d - 1
        return cls(
            d,
            np.zeros((0, num_qubits, depth, ns), dtype=bool),
            np.zeros((0, num_qubits, ns // 2), dtype=bool),
            np.zeros((0, num_qubits), dtype=bool),
            np.zeros((0, num_qubits, depth), dtype=np.uint8),
            np.zeros((0, num_qubits, depth), dtype=np.uint8),
        )

    @classmethod
    def from_list(cls, d: int, trajs: list[SyndromeTrajectory]) -> "TrajectoryBatch":
        if not trajs:
            raise ValueError("use TrajectoryBatch.empty for an empty batch")
        shapes = {(t.num_qubits, t.depth) for t in trajs}
        if len(shapes) != 1:
            raise DatasetFormatError(f"heterogeneous trajectories: {sorted(shapes)}")
        return cls(
            d,
            np.stack([t.syndromes for t in trajs]).astype(bool),
            np.stack([t.final for t in trajs]).astype(bool),
            np.stack([t.labels for t in trajs]).astype(bool),
            np.stack([t.tags for t in trajs]).astype(np.uint8),
            np.stack([t.partners for t in trajs]).astype(np.uint8),
        )

    @classmethod
    def concat(cls, batches: list["TrajectoryBatch"]) -> "TrajectoryBatch":
        b0 = batches[0]
        for b in batches[1:]:
            if (b.d, b.num_qubits, b.depth) != (b0.d, b0.num_qubits, b0.depth):
                raise DatasetFormatError("cannot concatenate heterogeneous batches")
        return cls(
            b0.d,
            np.concatenate([b.syndromes for b in batches]),
            np.concatenate([b.final for b in batches]),
            np.concatenate([b.labels for b in batches]),
            np.concatenate([b.tags for b in batches]),
            np.concatenate([b.partners for b in batches]),
        )

    def equals(self, other: "TrajectoryBatch") -> bool:
        return self.d == other.d and all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("syndromes", "final", "labels", "tags", "partners")
        )


def build_trajectory(shot: ShotRecord, dmap: DetectorMap, circuit: LogicalCircuit, d: int) -> TrajectoryBatch:
    """Detector and label bits for every shot in ``shot``."""
    if shot.meas_flips.shape[0] != dmap.num_measurements:
        raise InconsistentCircuitError(
            f"shot has {shot.meas_flips.shape[0]} measurements, detector map expects {dmap.num_measurements}"
        )
    if (circuit.num_qubits, circuit.depth) != (dmap.num_logical, dmap.depth):
        raise InconsistentCircuitError("circuit shape does not match detector map")
    dets, obs = dmap.evaluate(shot.meas_flips)
    n = shot.shots
    Q, D, ns, nz = dmap.num_logical, dmap.depth, dmap.num_stab, dmap.num_final
    nr = dmap.num_round_detectors
    syn = dets[:nr].T.reshape(n, Q, D, ns)
    fin = dets[nr:].T.reshape(n, Q, nz)
    tags, partners = circuit_tags(circuit)
    return TrajectoryBatch(
        d,
        np.ascontiguousarray(syn),
        np.ascontiguousarray(fin),
        np.ascontiguousarray(obs.T),
        np.broadcast_to(tags, (n, Q, D)).copy(),
        np.broadcast_to(partners, (n, Q, D)).copy(),
    )


@lru_cache(maxsize=4096)
def _compiled(text: str, d: int, noise: NoiseModel) -> tuple[LogicalCircuit, PhysicalCircuit, DetectorMap]:
    circuit = LogicalCircuit.from_text(text)
    layout = build_layout(d)
    pc = compile_circuit(circuit, layout, noise)
    return circuit, pc, build_detector_map(circuit, layout, pc)


def compiled(circuit: LogicalCircuit, d: int, noise: NoiseModel):
    """Cached (circuit, physical circuit, detector map) triple."""
    return _compiled(circuit.to_text(), d, noise)


def simulate_circuit(circuit: LogicalCircuit, d: int, noise: NoiseModel, shots: int,
                     rng: np.random.Generator) -> TrajectoryBatch:
    circuit, pc, dmap = compiled(circuit, d, noise)
    return build_trajectory(frame_sample(pc, rng, shots), dmap, circuit, d)


def generate(d: int, circuit_type: str, num_qubits: int, depth: int, count: int, seed: int,
             noise: NoiseModel | None = None, shots_per_circuit: int = 32, stream: int = 0) -> TrajectoryBatch:
    """``count`` trajectories of fresh random mirror circuits at one depth.

    Every group of ``shots_per_circuit`` shots shares one sampled circuit.
    Group ``g`` draws from ``shot_rng(seed, stream * 2**32 + g)``, so the
    output is a pure function of the arguments.
    """
    noise = NoiseModel() if noise is None else noise
    if count == 0:
        return TrajectoryBatch.empty(d, num_qubits, depth)
    parts = []
    done = 0
    g = 0
    while done < count:
        rng = shot_rng(seed, stream * 2**32 + g)
        n = min(shots_per_circuit, count - done)
        circuit = sample_mirror(circuit_type, num_qubits, depth, rng)
        parts.append(simulate_circuit(circuit, d, noise, n, rng))
        done += n
        g += 1
    return TrajectoryBatch.concat(parts)


# -- file I/O ----------------------------------------------------------------


def _pack_rows(bits: np.ndarray) -> np.ndarray:
    return np.packbits(bits.astype(bool), axis=-1, bitorder="little")


def write_dataset(path, batch: TrajectoryBatch) -> None:
    d, Q, D, N = batch.d, batch.num_qubits, batch.depth, len(batch)
    ns = d * d - 1
    if batch.syndromes.shape[3] != ns or batch.final.shape[2] != ns // 2:
        raise DatasetFormatError("trajectory vector lengths do not match d")
    size = record_size(d, Q, D)
    if N == 0:
        body = np.zeros((0, size), dtype=np.uint8)
    else:
        syn = _pack_rows(batch.syndromes).reshape(N, -1)
        fin = _pack_rows(batch.final).reshape(N, -1)
        lab = _pack_rows(batch.labels).reshape(N, -1)
        tags = batch.tags.astype(np.uint8).reshape(N, -1)
        partners = batch.partners.astype(np.uint8).reshape(N, -1)
        body = np.concatenate([syn, fin, lab, tags, partners], axis=1)
    with open(Path(path), "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, d, Q, D, N))
        fh.write(body.tobytes())


def record_size(d: int, Q: int, D: int) -> int:
    ns = d * d - 1
    return Q * D * ((ns + 7) // 8) + Q * ((ns // 2 + 7) // 8) + (Q + 7) // 8 + 2 * Q * D


def read_dataset(path) -> TrajectoryBatch:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DatasetFormatError("file shorter than header")
    magic, version, d, Q, D, N = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DatasetFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise DatasetFormatError(f"unsupported version {version}")
    ns = d * d - 1
    nz = ns // 2
    size = record_size(d, Q, D)
    body = raw[_HEADER.size:]
    if len(body) != N * size:
        raise DatasetFormatError(f"expected {N * size} record bytes, found {len(body)} (truncated?)")
    if N == 0:
        return TrajectoryBatch.empty(d, Q, D)
    rec = np.frombuffer(body, dtype=np.uint8).reshape(N, size)
    sb, fb, lb = (ns + 7) // 8, (nz + 7) // 8, (Q + 7) // 8
    o = 0
    syn = rec[:, o:o + Q * D * sb].reshape(N, Q, D, sb)
    o += Q * D * sb
    fin = rec[:, o:o + Q * fb].reshape(N, Q, fb)
    o += Q * fb
    lab = rec[:, o:o + lb]
    o += lb
    tags = rec[:, o:o + Q * D].reshape(N, Q, D).copy()
    o += Q * D
    partners = rec[:, o:o + Q * D].reshape(N, Q, D).copy()
    unpack = lambda a, n: np.unpackbits(a, axis=-1, count=n, bitorder="little").astype(bool)  # noqa: E731
    return TrajectoryBatch(d, unpack(syn, ns), unpack(fin, nz), unpack(lab, Q), tags, partners)
