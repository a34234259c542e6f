"""Noiseless stabilizer tableau simulation (Aaronson-Gottesman CHP).

Serves as the reference the frame simulator is checked against.  Rows
``0..n-1`` of the tableau are destabilizers, rows ``n..2n-1`` stabilizers.
"""

from __future__ import annotations

import numpy as np

from .compiler import PhysicalCircuit, NOISE_OPS


class UnsupportedInstructionError(ValueError):
    pass


def _g_phase(x1, z1, x2, z2) -> np.ndarray:
    """Exponent of i picked up when multiplying Pauli (x1,z1) into (x2,z2)."""
    x1 = x1.astype(np.int8)
    z1 = z1.astype(np.int8)
    x2 = x2.astype(np.int8)
    z2 = z2.astype(np.int8)
    return np.where(
        (x1 == 1) & (z1 == 1), z2 - x2,
        np.where((x1 == 1) & (z1 == 0), z2 * (2 * x2 - 1),
                 np.where((x1 == 0) & (z1 == 1), x2 * (1 - 2 * z2), 0)),
    ).astype(np.int64)


class Tableau:
    def __init__(self, n: int):
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=bool)
        self.z = np.zeros((2 * n, n), dtype=bool)
        self.r = np.zeros(2 * n, dtype=bool)
        idx = np.arange(n)
        self.x[idx, idx] = True
        self.z[n + idx, idx] = True

    def copy(self) -> "Tableau":
        t = Tableau.__new__(Tableau)
        t.n, t.x, t.z, t.r = self.n, self.x.copy(), self.z.copy(), self.r.copy()
        return t

    # gates act on all rows at once; multi-target calls need disjoint qubits
    def h(self, qs):
        qs = np.atleast_1d(qs)
        self.r ^= np.bitwise_xor.reduce(self.x[:, qs] & self.z[:, qs], axis=1)
        self.x[:, qs], self.z[:, qs] = self.z[:, qs], self.x[:, qs]

    def s(self, qs):
        qs = np.atleast_1d(qs)
        self.r ^= np.bitwise_xor.reduce(self.x[:, qs] & self.z[:, qs], axis=1)
        self.z[:, qs] ^= self.x[:, qs]

    def cx(self, c, t):
        c, t = np.atleast_1d(c), np.atleast_1d(t)
        xc, zc, xt, zt = self.x[:, c], self.z[:, c], self.x[:, t], self.z[:, t]
        self.r ^= np.bitwise_xor.reduce(xc & zt & ~(xt ^ zc), axis=1)
        self.x[:, t] = xt ^ xc
        self.z[:, c] = zc ^ zt

    def cz(self, a, b):
        self.h(b)
        self.cx(a, b)
        self.h(b)

    def pauli_x(self, qs):
        self.r ^= np.bitwise_xor.reduce(self.z[:, np.atleast_1d(qs)], axis=1)

    def pauli_z(self, qs):
        self.r ^= np.bitwise_xor.reduce(self.x[:, np.atleast_1d(qs)], axis=1)

    def pauli_y(self, qs):
        qs = np.atleast_1d(qs)
        self.r ^= np.bitwise_xor.reduce(self.x[:, qs] ^ self.z[:, qs], axis=1)

    def _rowmult(self, targets: np.ndarray, src_x, src_z, src_r):
        """Left-multiply rows ``targets`` by the Pauli (src_x, src_z, src_r)."""
        if len(targets) == 0:
            return
        g = _g_phase(src_x[None, :], src_z[None, :], self.x[targets], self.z[targets]).sum(axis=1)
        total = 2 * self.r[targets].astype(np.int64) + 2 * int(src_r) + g
        self.r[targets] = (total % 4) == 2
        self.x[targets] ^= src_x
        self.z[targets] ^= src_z

    def measure(self, a: int, rng: np.random.Generator) -> tuple[int, bool]:
        """Measure qubit ``a`` in Z; returns (outcome, was_random)."""
        n = self.n
        stab_hits = np.flatnonzero(self.x[n:, a])
        if len(stab_hits):
            p = n + stab_hits[0]
            others = np.flatnonzero(self.x[:, a])
            others = others[others != p]
            self._rowmult(others, self.x[p].copy(), self.z[p].copy(), self.r[p])
            self.x[p - n], self.z[p - n], self.r[p - n] = self.x[p], self.z[p], self.r[p]
            self.x[p] = False
            self.z[p] = False
            self.z[p, a] = True
            outcome = int(rng.integers(2))
            self.r[p] = bool(outcome)
            return outcome, True
        sx = np.zeros(n, dtype=bool)
        sz = np.zeros(n, dtype=bool)
        sr = 0
        for i in np.flatnonzero(self.x[:n, a]):
            row = n + i
            g = int(_g_phase(self.x[row], self.z[row], sx, sz).sum())
            sr = ((2 * sr + 2 * int(self.r[row]) + g) % 4) // 2
            sx ^= self.x[row]
            sz ^= self.z[row]
        return sr, False

    def reset(self, a: int, rng: np.random.Generator):
        outcome, _ = self.measure(a, rng)
        if outcome:
            self.pauli_x(a)

    def is_valid(self) -> bool:
        """Generators form a symplectic basis: destab_i anticommutes with stab_i only."""
        n = self.n
        x = self.x.astype(np.int64)
        z = self.z.astype(np.int64)
        form = (x @ z.T + z @ x.T) % 2
        want = np.zeros((2 * n, 2 * n), dtype=np.int64)
        idx = np.arange(n)
        want[idx, n + idx] = 1
        want[n + idx, idx] = 1
        return bool(np.array_equal(form, want))


_SINGLE = {"I": None, "X": "pauli_x", "Y": "pauli_y", "Z": "pauli_z", "H": "h"}


def apply_instruction(tab: Tableau, ins, rng: np.random.Generator, record: np.ndarray,
                      random_mask: np.ndarray, m: int) -> int:
    """Apply one noiseless instruction; returns the next measurement index."""
    name = ins.name
    if name in NOISE_OPS:
        return m
    if name in _SINGLE:
        if _SINGLE[name] is not None:
            getattr(tab, _SINGLE[name])(ins.targets)
    elif name == "CX":
        tab.cx(ins.targets[:, 0], ins.targets[:, 1])
    elif name == "CZ":
        tab.cz(ins.targets[:, 0], ins.targets[:, 1])
    elif name == "R":
        for q in ins.targets:
            tab.reset(int(q), rng)
    elif name == "M":
        for q in ins.targets:
            record[m], random_mask[m] = tab.measure(int(q), rng)
            m += 1
    else:
        raise UnsupportedInstructionError(f"tableau cannot run {name!r}")
    return m


def tableau_run(circuit: PhysicalCircuit, seed: int | np.random.Generator = 0,
                return_random_mask: bool = False):
    """Noiseless measurement record of ``circuit``.

    Noise instructions are skipped.  Random outcomes draw from a generator
    seeded by ``seed``; deterministic outcomes do not consume randomness, so
    two circuits differing only by Pauli gates consume the same tape.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    tab = Tableau(circuit.num_qubits)
    record = np.zeros(circuit.num_measurements, dtype=bool)
    random_mask = np.zeros(circuit.num_measurements, dtype=bool)
    m = 0
    for ins in circuit.instructions:
        m = apply_instruction(tab, ins, rng, record, random_mask, m)
    if return_random_mask:
        return record, random_mask
    return record
