"""Lowering of logical circuits to physical circuits, plus detector bookkeeping.

Each logical qubit is a distance-``d`` patch.  Physical qubit indices are
laid out block by block: block ``q`` owns ``[q*B, (q+1)*B)`` with
``B = 2d^2 - 1``; data qubits first, then ancillas in canonical order of
the unrotated layout.

A logical H applies physical H to every data qubit and then relabels the
patch as a quarter turn of itself (no physical movement).  All later
operations on that block address qubits through the rotated index maps,
so stabilizer identities and transversal CNOT pairings stay consistent.
The relabel toggles between two orientations (turn forward, then back),
which makes the two halves of a mirror circuit physically identical
layer by layer; the final column of Z then reads the logical value
without any stabilizer-sign correction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .geometry import CodeLayout, orientation_maps
from .logical import LogicalCircuit, SINGLE_QUBIT_GATES, CircuitError
from .noise import NoiseModel

CLIFFORD_1Q = ("I", "X", "Y", "Z", "H")
NOISE_OPS = ("PAULI1", "PAULI2", "XERR")
ALL_OPS = CLIFFORD_1Q + ("CX", "CZ", "R", "M") + NOISE_OPS


@dataclass(frozen=True)
class Instruction:
    name: str
    targets: np.ndarray  # shape (k,) or (k, 2) for two-qubit ops
    channel: str | None = None  # noise channel name, see NoiseModel.channel

    @property
    def is_noise(self) -> bool:
        return self.name in NOISE_OPS

    @property
    def num_sites(self) -> int:
        return len(self.targets)


@dataclass
class PhysicalCircuit:
    num_qubits: int
    instructions: list[Instruction]
    num_measurements: int
    noise: NoiseModel
    d: int
    num_logical: int
    depth: int
    # bookkeeping for detector construction
    round_meas: np.ndarray = field(repr=False, default=None)  # (Q, D, nstab) by physical ancilla
    final_meas: np.ndarray = field(repr=False, default=None)  # (Q, d*d) by physical data
    orientation: np.ndarray = field(repr=False, default=None)  # (Q, D+1)

    def block_base(self, q: int) -> int:
        return q * (2 * self.d * self.d - 1)

    def count(self, name: str) -> int:
        """Number of operation sites of ``name`` (pairs count once)."""
        return sum(ins.num_sites for ins in self.instructions if ins.name == name)

    def with_instruction(self, position: int, ins: Instruction) -> "PhysicalCircuit":
        """Copy with ``ins`` inserted before instruction ``position``."""
        instrs = list(self.instructions)
        instrs.insert(position, ins)
        return PhysicalCircuit(
            self.num_qubits, instrs, self.num_measurements, self.noise, self.d,
            self.num_logical, self.depth, self.round_meas, self.final_meas, self.orientation,
        )


def _arr(values) -> np.ndarray:
    return np.asarray(values, dtype=np.int64)


class _Builder:
    def __init__(self):
        self.instructions: list[Instruction] = []
        self.num_meas = 0

    def gate(self, name, targets, noise_channel=None):
        targets = _arr(targets)
        if len(targets) == 0:
            return
        self.instructions.append(Instruction(name, targets))
        if noise_channel is not None:
            op = "PAULI2" if targets.ndim == 2 else "PAULI1"
            self.instructions.append(Instruction(op, targets, noise_channel))

    def noise(self, op, targets, channel):
        targets = _arr(targets)
        if len(targets):
            self.instructions.append(Instruction(op, targets, channel))

    def reset(self, targets):
        self.gate("R", targets)
        self.noise("XERR", targets, "reset")

    def measure(self, targets) -> np.ndarray:
        targets = _arr(targets)
        self.instructions.append(Instruction("M", targets, "meas"))
        idx = np.arange(self.num_meas, self.num_meas + len(targets))
        self.num_meas += len(targets)
        return idx


def compile_circuit(circuit: LogicalCircuit, layout: CodeLayout, noise: NoiseModel | None = None) -> PhysicalCircuit:
    """Lower ``circuit`` to physical instructions with noise annotations."""
    noise = NoiseModel() if noise is None else noise
    d = layout.d
    nd = d * d
    ns = nd - 1
    block = nd + ns
    Q, D = circuit.num_qubits, circuit.depth

    def data_phys(q, o):
        return q * block + orientation_maps(d, o)[0]

    anc_base = lambda q: q * block + nd  # noqa: E731
    stab_types = np.array([b for _, b in layout.ancillas])
    schedule = np.array(layout.schedule)  # (ns, 4), canonical data or -1

    b = _Builder()
    orient = np.zeros((Q, D + 1), dtype=np.int64)
    round_meas = np.zeros((Q, D, ns), dtype=np.int64)

    all_data = np.concatenate([q * block + np.arange(nd) for q in range(Q)])
    all_anc = np.concatenate([anc_base(q) + np.arange(ns) for q in range(Q)])
    b.reset(all_data)

    for t, layer in enumerate(circuit.layers):
        o = orient[:, t].copy()
        moved = []
        for g in layer:
            if g.kind == "CNOT" or (g.kind == "H" and noise.move_on_h):
                for q in g.operands:
                    moved.append(data_phys(q, o[q]))
        if moved:
            b.noise("PAULI1", np.concatenate(moved), "move")
        for kind in SINGLE_QUBIT_GATES:
            qs = [g.operands[0] for g in layer if g.kind == kind]
            if qs:
                b.gate(kind, np.concatenate([data_phys(q, o[q]) for q in qs]), "p1q")
        pairs = []
        for g in layer:
            if g.kind == "CNOT":
                c, tq = g.operands
                pairs.append(np.stack([data_phys(c, o[c]), data_phys(tq, o[tq])], axis=1))
            elif g.kind not in SINGLE_QUBIT_GATES:
                raise CircuitError(f"unknown gate kind {g.kind!r}")
        if pairs:
            b.gate("CX", np.concatenate(pairs), "p2q")
        for g in layer:
            if g.kind == "H":
                o[g.operands[0]] ^= 1
        orient[:, t + 1] = o

        # stabilizer measurement round on every block
        b.reset(all_anc)
        b.gate("H", all_anc, "p1q")
        for step in range(4):
            cz, cx = [], []
            for q in range(Q):
                dmap, amap = orientation_maps(d, int(orient[q, t + 1]))
                has = schedule[:, step] >= 0
                anc = anc_base(q) + amap[has]
                dat = q * block + dmap[schedule[has, step]]
                is_z = stab_types[has] == "Z"
                cz.append(np.stack([dat[is_z], anc[is_z]], axis=1))
                cx.append(np.stack([anc[~is_z], dat[~is_z]], axis=1))
            cz, cx = np.concatenate(cz), np.concatenate(cx)
            b.gate("CZ", cz)
            b.gate("CX", cx)
            b.noise("PAULI2", np.concatenate([cz, cx]), "p2q")
        b.gate("H", all_anc, "p1q")
        idx = b.measure(all_anc)
        round_meas[:, t, :] = idx.reshape(Q, ns)

    idx = b.measure(all_data)
    final_meas = idx.reshape(Q, nd)

    return PhysicalCircuit(
        num_qubits=Q * block,
        instructions=b.instructions,
        num_measurements=b.num_meas,
        noise=noise,
        d=d,
        num_logical=Q,
        depth=D,
        round_meas=round_meas,
        final_meas=final_meas,
        orientation=orient,
    )


@dataclass
class DetectorMap:
    """Measurement parities defining detectors and logical observables.

    Detector ``(q, t, s)`` has flat index ``(q*D + t)*nstab + s``; the
    reconstructed final-round Z detectors follow at
    ``Q*D*nstab + q*nz + k``.  An empty parity list marks a position whose
    stabilizer value is not determined by the preparation (first-round
    checks with random outcomes); it always reads 0.
    """

    num_logical: int
    depth: int
    num_stab: int
    num_final: int
    detectors: list[list[int]]
    observables: list[list[int]]
    num_measurements: int

    @property
    def num_detectors(self) -> int:
        return len(self.detectors)

    @property
    def num_round_detectors(self) -> int:
        return self.num_logical * self.depth * self.num_stab

    def det_index(self, q: int, t: int, s: int) -> int:
        return (q * self.depth + t) * self.num_stab + s

    def final_index(self, q: int, k: int) -> int:
        return self.num_round_detectors + q * self.num_final + k

    def _matrix(self, rows) -> sp.csr_matrix:
        indptr = np.cumsum([0] + [len(r) for r in rows])
        indices = np.array([i for r in rows for i in r], dtype=np.int64)
        data = np.ones(len(indices), dtype=np.uint8)
        return sp.csr_matrix((data, indices, indptr), shape=(len(rows), self.num_measurements))

    @property
    def detector_matrix(self) -> sp.csr_matrix:
        if not hasattr(self, "_det_m"):
            self._det_m = self._matrix(self.detectors)
        return self._det_m

    @property
    def observable_matrix(self) -> sp.csr_matrix:
        if not hasattr(self, "_obs_m"):
            self._obs_m = self._matrix(self.observables)
        return self._obs_m

    def evaluate(self, meas: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Detector and observable bits from a (n_meas, shots) record."""
        m = np.asarray(meas, dtype=np.uint8)
        dets = (self.detector_matrix @ m) & 1
        obs = (self.observable_matrix @ m) & 1
        return dets.astype(bool), obs.astype(bool)


def build_detector_map(circuit: LogicalCircuit, layout: CodeLayout, physical: PhysicalCircuit | None = None) -> DetectorMap:
    """Detectors follow stabilizer flow through each layer's gates.

    Single-qubit gates keep every physical ancilla's predecessor (H swaps
    the ancilla's type, which is exactly the image of the old stabilizer
    under transversal H).  A transversal CNOT folds the target's Z checks
    and the control's X checks onto both blocks' previous measurements.
    """
    if physical is None:
        physical = compile_circuit(circuit, layout, NoiseModel.noiseless())
    d = layout.d
    ns = d * d - 1
    nz = layout.num_z
    Q, D = circuit.num_qubits, circuit.depth
    is_x = np.array([b == "X" for _, b in layout.ancillas])

    # prev[q][a]: parity set of the last value of physical ancilla a, or None
    # when that value is random.
    prev = []
    for q in range(Q):
        _, amap0 = orientation_maps(d, 0)
        row: list[frozenset | None] = [None] * ns
        for s in range(ns):
            row[amap0[s]] = None if is_x[s] else frozenset()
        prev.append(row)

    dets: list[list[int]] = [[] for _ in range(Q * D * ns)]
    for t, layer in enumerate(circuit.layers):
        src = [list(r) for r in prev]
        for g in layer:
            if g.kind != "CNOT":
                continue
            c, tg = g.operands
            _, amap_c = orientation_maps(d, int(physical.orientation[c, t]))
            _, amap_t = orientation_maps(d, int(physical.orientation[tg, t]))
            for s in range(ns):
                ac, at = amap_c[s], amap_t[s]
                pc, pt = prev[c][ac], prev[tg][at]
                both = None if pc is None or pt is None else pc ^ pt
                if is_x[s]:
                    src[c][ac] = both
                else:
                    src[tg][at] = both
        for q in range(Q):
            _, amap = orientation_maps(d, int(physical.orientation[q, t + 1]))
            for s in range(ns):
                a = amap[s]
                m = int(physical.round_meas[q, t, a])
                if src[q][a] is not None:
                    dets[(q * D + t) * ns + s] = sorted(src[q][a] ^ {m})
                prev[q][a] = frozenset((m,))

    final: list[list[int]] = []
    observables: list[list[int]] = []
    for q in range(Q):
        dmap, amap = orientation_maps(d, int(physical.orientation[q, D]))
        for s in range(ns):
            if is_x[s]:
                continue
            a = amap[s]
            parity = {int(physical.final_meas[q, dmap[k]]) for k in layout.stab_support[s]}
            last = prev[q][a]
            if last is None:
                final.append([])
            else:
                final.append(sorted(last ^ parity))
        observables.append(sorted(int(physical.final_meas[q, dmap[k]]) for k in layout.logical_z_support))

    return DetectorMap(
        num_logical=Q,
        depth=D,
        num_stab=ns,
        num_final=nz,
        detectors=dets + final,
        observables=observables,
        num_measurements=physical.num_measurements,
    )
