"""Bit-packed Pauli frame simulation.

Frames are stored as ``uint64`` words: row ``q`` of ``x``/``z`` holds the
X/Z flip of qubit ``q`` for 64 shots per word.  Gates act on whole rows, so
one instruction costs a handful of numpy row operations regardless of the
shot count.  Noise is injected as sparse events: a Bernoulli process over
``(site, shot)`` slots sampled by geometric gaps, then a component draw.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .compiler import Instruction, PhysicalCircuit
from .noise import COMPONENTS_1Q, COMPONENTS_2Q, NoiseModel

_ONE = np.uint64(1)


class ChannelArityError(ValueError):
    pass


def num_words(shots: int) -> int:
    return (shots + 63) // 64


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a (rows, shots) bool array into (rows, words) uint64."""
    bits = np.asarray(bits, dtype=bool)
    rows, shots = bits.shape
    w = num_words(shots)
    padded = np.zeros((rows, w * 64), dtype=bool)
    padded[:, :shots] = bits
    return np.packbits(padded, axis=1, bitorder="little").view(np.uint64)


def unpack_bits(words: np.ndarray, shots: int) -> np.ndarray:
    """Inverse of :func:`pack_bits`."""
    words = np.ascontiguousarray(words, dtype=np.uint64)
    as_bytes = words.view(np.uint8)
    return np.unpackbits(as_bytes, axis=1, bitorder="little", count=shots).astype(bool)


def popcount_rows(words: np.ndarray) -> np.ndarray:
    return np.unpackbits(np.ascontiguousarray(words).view(np.uint8), axis=-1).sum(axis=-1)


@dataclass
class PauliFrame:
    """X/Z flip bits for ``num_qubits`` qubits over ``shots`` shots."""

    num_qubits: int
    shots: int = 1
    x: np.ndarray = field(default=None, repr=False)
    z: np.ndarray = field(default=None, repr=False)
    record: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        w = num_words(self.shots)
        if self.x is None:
            self.x = np.zeros((self.num_qubits, w), dtype=np.uint64)
        if self.z is None:
            self.z = np.zeros((self.num_qubits, w), dtype=np.uint64)

    def copy(self) -> "PauliFrame":
        return PauliFrame(self.num_qubits, self.shots, self.x.copy(), self.z.copy(), list(self.record))

    def x_bits(self) -> np.ndarray:
        return unpack_bits(self.x, self.shots)

    def z_bits(self) -> np.ndarray:
        return unpack_bits(self.z, self.shots)

    def __eq__(self, other):
        if not isinstance(other, PauliFrame):
            return NotImplemented
        return (
            self.num_qubits == other.num_qubits
            and self.shots == other.shots
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.z, other.z)
        )

    def xor_events(self, which: str, qubits: np.ndarray, shots: np.ndarray) -> None:
        arr = self.x if which == "x" else self.z
        shots = np.asarray(shots, dtype=np.uint64)
        np.bitwise_xor.at(arr, (np.asarray(qubits), (shots >> np.uint64(6)).astype(np.int64)),
                          _ONE << (shots & np.uint64(63)))


# -- gate conjugation ------------------------------------------------------


def _two(targets):
    t = np.asarray(targets)
    return t[:, 0], t[:, 1]


def propagate_gate(frame: PauliFrame, gate: str, qubits) -> PauliFrame:
    """Conjugate ``frame`` by ``gate`` applied to ``qubits`` (in place).

    Two-qubit gates take an array of (a, b) pairs; all pairs in one call
    must be disjoint.  ``MeasureZ`` appends the X-flip rows of the measured
    qubits to ``frame.record``.
    """
    if gate in ("I", "X", "Y", "Z"):
        return frame
    if gate == "H":
        q = np.asarray(qubits)
        frame.x[q], frame.z[q] = frame.z[q], frame.x[q].copy()
    elif gate in ("CX", "CNOT"):
        c, t = _two(qubits)
        frame.x[t] ^= frame.x[c]
        frame.z[c] ^= frame.z[t]
    elif gate == "CZ":
        a, b = _two(qubits)
        xa, xb = frame.x[a], frame.x[b]
        frame.z[a] ^= xb
        frame.z[b] ^= xa
    elif gate in ("R", "Reset"):
        q = np.asarray(qubits)
        frame.x[q] = 0
        frame.z[q] = 0
    elif gate in ("M", "MeasureZ"):
        frame.record.append(frame.x[np.asarray(qubits)].copy())
    else:
        raise ValueError(f"unsupported gate {gate!r}")
    return frame


# -- noise sampling --------------------------------------------------------


def bernoulli_positions(rng: np.random.Generator, n: int, p: float) -> np.ndarray:
    """Sorted indices in ``range(n)`` each selected independently with prob ``p``."""
    if p <= 0 or n == 0:
        return np.empty(0, dtype=np.int64)
    if p >= 0.05:
        return np.flatnonzero(rng.random(n) < p)
    mean = n * p
    chunk = int(mean + 6 * np.sqrt(mean) + 16)
    out = []
    pos = -1
    while True:
        gaps = rng.geometric(p, size=chunk)
        steps = pos + np.cumsum(gaps)
        out.append(steps[steps < n])
        if steps[-1] >= n:
            break
        pos = int(steps[-1])
    return np.concatenate(out)


def sample_channel_events(rng, num_sites: int, shots: int, probs) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Sample (site, shot, component) triples of a Pauli/bit-flip channel."""
    probs = np.asarray(probs, dtype=np.float64)
    total = float(probs.sum())
    pos = bernoulli_positions(rng, num_sites * shots, total)
    if len(pos) == 0:
        e = np.empty(0, dtype=np.int64)
        return e, e, e
    if len(probs) == 1:
        comp = np.zeros(len(pos), dtype=np.int64)
    else:
        comp = rng.choice(len(probs), size=len(pos), p=probs / total)
    return pos // shots, pos % shots, comp


def inject_components(frame: PauliFrame, targets: np.ndarray, sites, shots, comps) -> None:
    """XOR the listed Pauli components into ``frame``."""
    targets = np.asarray(targets)
    if len(sites) == 0:
        return
    if targets.ndim == 1:
        table = COMPONENTS_1Q[comps]
        q = targets[sites]
        for col, which in ((0, "x"), (1, "z")):
            m = table[:, col] == 1
            if m.any():
                frame.xor_events(which, q[m], shots[m])
    else:
        table = COMPONENTS_2Q[comps]
        for k in range(2):
            q = targets[sites, k]
            for col, which in ((2 * k, "x"), (2 * k + 1, "z")):
                m = table[:, col] == 1
                if m.any():
                    frame.xor_events(which, q[m], shots[m])


def apply_pauli_channel(frame: PauliFrame, qubits, probs, rng: np.random.Generator) -> PauliFrame:
    """Apply an independent Pauli channel at each site in ``qubits``.

    Three probabilities (X, Y, Z) act on single qubits; fifteen act on
    (a, b) pairs in IX, IY, ..., ZZ order.
    """
    probs = tuple(probs)
    targets = np.asarray(qubits)
    if len(probs) == 3:
        if targets.ndim != 1:
            raise ChannelArityError("3-entry channel needs a flat list of qubits")
    elif len(probs) == 15:
        if targets.ndim != 2 or targets.shape[1] != 2:
            raise ChannelArityError("15-entry channel needs (a, b) qubit pairs")
    else:
        raise ChannelArityError(f"channel needs 3 or 15 probabilities, got {len(probs)}")
    if sum(probs) > 1 + 1e-12:
        raise ChannelArityError("channel probabilities sum above 1")
    sites, shots, comps = sample_channel_events(rng, len(targets), frame.shots, probs)
    inject_components(frame, targets, sites, shots, comps)
    return frame


# -- whole-circuit sampling -------------------------------------------------


@dataclass
class ShotRecord:
    """Measurement flips relative to the noiseless reference record."""

    meas_flips: np.ndarray  # (n_meas, shots) bool
    final_data_index: np.ndarray  # measurement indices of final data readout

    @property
    def shots(self) -> int:
        return self.meas_flips.shape[1]

    @property
    def final_data_flips(self) -> np.ndarray:
        return self.meas_flips[self.final_data_index]


class EventSource:
    """Supplies noise events for each noise instruction of a circuit."""

    def events(self, index: int, ins: Instruction, shots: int):
        raise NotImplementedError


class RandomNoise(EventSource):
    def __init__(self, noise: NoiseModel, rng: np.random.Generator):
        self.noise = noise
        self.rng = rng

    def events(self, index, ins, shots):
        probs = self.noise.channel(ins.channel)
        if sum(probs) <= 0:
            return None
        return sample_channel_events(self.rng, ins.num_sites, shots, probs)


class Injections(EventSource):
    """Deterministic events keyed by instruction index.

    ``table[index]`` is a tuple ``(sites, shots, components)`` of arrays.
    """

    def __init__(self, table: dict):
        self.table = table

    def events(self, index, ins, shots):
        return self.table.get(index)


def run_frames(circuit: PhysicalCircuit, shots: int, source: EventSource | None,
               gauge_rng: np.random.Generator | None = None) -> np.ndarray:
    """Propagate frames through ``circuit``; return packed measurement flips.

    With ``gauge_rng`` set, Z flips are randomized after every reset and
    measurement.  That leaves every deterministic quantity untouched while
    making non-deterministic measurement outcomes uniformly random, so the
    result XOR a reference record is a faithful noiseless sample.
    """
    frame = PauliFrame(circuit.num_qubits, shots)
    w = num_words(shots)
    rec = np.zeros((circuit.num_measurements, w), dtype=np.uint64)
    m_ptr = 0

    def gauge(q):
        if gauge_rng is not None:
            frame.z[q] = gauge_rng.integers(0, 2**64, size=(len(q), w), dtype=np.uint64, endpoint=False)

    for k, ins in enumerate(circuit.instructions):
        name = ins.name
        if name in ("PAULI1", "PAULI2", "XERR"):
            if source is None:
                continue
            ev = source.events(k, ins, shots)
            if ev is None:
                continue
            sites, sh, comps = ev
            if name == "XERR":
                frame.xor_events("x", ins.targets[sites], sh)
            else:
                inject_components(frame, ins.targets, sites, sh, comps)
        elif name == "M":
            q = ins.targets
            n = len(q)
            rec[m_ptr:m_ptr + n] = frame.x[q]
            if source is not None:
                ev = source.events(k, ins, shots)
                if ev is not None:
                    sites, sh, _ = ev
                    sh = np.asarray(sh, dtype=np.uint64)
                    np.bitwise_xor.at(rec, (m_ptr + np.asarray(sites), (sh >> np.uint64(6)).astype(np.int64)),
                                      _ONE << (sh & np.uint64(63)))
            gauge(q)
            m_ptr += n
        elif name == "R":
            propagate_gate(frame, "R", ins.targets)
            gauge(ins.targets)
        else:
            propagate_gate(frame, name, ins.targets)
    if shots % 64:
        rec[:, -1] &= np.uint64((1 << (shots % 64)) - 1)
    return rec


def frame_sample(circuit: PhysicalCircuit, rng: np.random.Generator, shots: int = 1,
                 noise: NoiseModel | None = None, randomize_gauge: bool = False) -> ShotRecord:
    """Sample ``shots`` noisy measurement-flip records of ``circuit``."""
    noise = circuit.noise if noise is None else noise
    source = RandomNoise(noise, rng)
    packed = run_frames(circuit, shots, source, gauge_rng=rng if randomize_gauge else None)
    flips = unpack_bits(packed, shots)
    return ShotRecord(flips, circuit.final_meas.reshape(-1))


def shot_rng(master_seed: int, index: int) -> np.random.Generator:
    """Generator for block ``index`` of a run seeded with ``master_seed``.

    Streams are spawned from ``SeedSequence(master_seed)`` by index, so
    blocks are independent and can be generated in any order.
    """
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(index,)))
