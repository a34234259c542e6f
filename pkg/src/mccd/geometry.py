"""Rotated surface code layout.

Coordinates use a doubled-free integer frame: data qubit ``(r, c)`` with
``0 <= r, c < d``; an ancilla ``(i, j)`` with ``0 <= i, j <= d`` sits at the
plaquette center ``(i - 0.5, j - 0.5)`` and touches data rows ``i-1, i`` and
columns ``j-1, j``.

Bulk plaquettes are Z-type when ``i + j`` is odd and X-type when even.
Weight-2 Z plaquettes sit on the top and bottom edges, weight-2 X
plaquettes on the left and right edges, so a column of Z is a logical Z
and a row of X is a logical X.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class InvalidDistanceError(ValueError):
    pass


# Corner offsets (drow, dcol) relative to the ancilla (i, j); data (i+dr, j+dc).
NW, NE, SW, SE = (-1, -1), (-1, 0), (0, -1), (0, 0)

# CZ/CX sub-step order.  X plaquettes sweep column-first ("N" shape) and Z
# plaquettes row-first ("Z" shape) so hook errors run perpendicular to the
# logical operator of the same type.
X_SCHEDULE = (SE, NE, SW, NW)
Z_SCHEDULE = (SE, SW, NE, NW)


@dataclass(frozen=True)
class CodeLayout:
    d: int
    data_qubits: tuple[tuple[int, int], ...]
    ancillas: tuple[tuple[tuple[int, int], str], ...]
    stab_support: tuple[tuple[int, ...], ...]
    # schedule[s][k] is the data index touched at sub-step k, or -1.
    schedule: tuple[tuple[int, ...], ...]
    logical_z_support: tuple[int, ...]
    logical_x_support: tuple[int, ...]

    @property
    def num_data(self) -> int:
        return len(self.data_qubits)

    @property
    def num_stabilizers(self) -> int:
        return len(self.ancillas)

    @property
    def num_z(self) -> int:
        return sum(1 for _, b in self.ancillas if b == "Z")

    @property
    def z_indices(self) -> list[int]:
        return [s for s, (_, b) in enumerate(self.ancillas) if b == "Z"]

    @property
    def x_indices(self) -> list[int]:
        return [s for s, (_, b) in enumerate(self.ancillas) if b == "X"]

    def data_index(self, r: int, c: int) -> int:
        return r * self.d + c

    def check_matrix(self, basis: str) -> np.ndarray:
        """Binary matrix with one row per stabilizer of ``basis``."""
        rows = [s for s, (_, b) in enumerate(self.ancillas) if b == basis]
        out = np.zeros((len(rows), self.num_data), dtype=np.uint8)
        for k, s in enumerate(rows):
            out[k, list(self.stab_support[s])] = 1
        return out


def _basis_at(i: int, j: int, d: int) -> str | None:
    """Stabilizer type of plaquette (i, j), or None if absent."""
    bulk_i = 1 <= i <= d - 1
    bulk_j = 1 <= j <= d - 1
    z_parity = (i + j) % 2 == 1
    if bulk_i and bulk_j:
        return "Z" if z_parity else "X"
    if bulk_j and i in (0, d) and z_parity:
        return "Z"
    if bulk_i and j in (0, d) and not z_parity:
        return "X"
    return None


@lru_cache(maxsize=None)
def build_layout(d: int) -> CodeLayout:
    if not isinstance(d, (int, np.integer)) or d < 3 or d % 2 == 0:
        raise InvalidDistanceError(f"code distance must be an odd integer >= 3, got {d!r}")
    d = int(d)
    data = tuple((r, c) for r in range(d) for c in range(d))

    plaquettes = []
    for i in range(d + 1):
        for j in range(d + 1):
            basis = _basis_at(i, j, d)
            if basis is not None:
                plaquettes.append(((i, j), basis))
    # canonical stabilizer order: Z block then X block, row-major inside each
    plaquettes.sort(key=lambda p: (p[1] != "Z", p[0]))

    supports = []
    schedules = []
    for (i, j), basis in plaquettes:
        order = Z_SCHEDULE if basis == "Z" else X_SCHEDULE
        sched = []
        for dr, dc in order:
            r, c = i + dr, j + dc
            sched.append(r * d + c if 0 <= r < d and 0 <= c < d else -1)
        schedules.append(tuple(sched))
        supports.append(tuple(sorted(q for q in sched if q >= 0)))

    layout = CodeLayout(
        d=d,
        data_qubits=data,
        ancillas=tuple(plaquettes),
        stab_support=tuple(supports),
        schedule=tuple(schedules),
        logical_z_support=tuple(r * d for r in range(d)),
        logical_x_support=tuple(range(d)),
    )
    if not check_commutation(layout):
        raise AssertionError(f"layout for d={d} violates stabilizer algebra")
    return layout


def check_commutation(layout: CodeLayout) -> bool:
    """True iff the layout's stabilizer and logical algebra is consistent."""
    d = layout.d
    n = d * d
    if len(layout.data_qubits) != n or len(layout.ancillas) != n - 1:
        return False
    if layout.num_z != (n - 1) // 2:
        return False
    if any(len(s) not in (2, 4) for s in layout.stab_support):
        return False
    if len(layout.logical_z_support) != d or len(layout.logical_x_support) != d:
        return False

    hx = layout.check_matrix("X").astype(np.int64)
    hz = layout.check_matrix("Z").astype(np.int64)
    lz = np.zeros(n, dtype=np.int64)
    lz[list(layout.logical_z_support)] = 1
    lx = np.zeros(n, dtype=np.int64)
    lx[list(layout.logical_x_support)] = 1

    if np.any((hx @ hz.T) % 2):
        return False
    if np.any((hx @ lz) % 2) or np.any((hz @ lx) % 2):
        return False
    return int(lz @ lx) % 2 == 1


# -- orientation bookkeeping for the virtual rotation after logical H ------


def rotate_data(d: int, r: int, c: int) -> tuple[int, int]:
    """Quarter turn of the patch: (r, c) -> (c, d-1-r)."""
    return c, d - 1 - r


def rotate_plaquette(d: int, i: int, j: int) -> tuple[int, int]:
    return j, d - i


@lru_cache(maxsize=None)
def orientation_maps(d: int, orientation: int) -> tuple[np.ndarray, np.ndarray]:
    """Canonical -> physical index maps for a patch turned ``orientation``
    quarter turns.

    Returns ``(data_map, anc_map)`` where ``data_map[k]`` is the physical
    data index hosting canonical data qubit ``k`` and ``anc_map[s]`` the
    physical ancilla index hosting canonical stabilizer ``s``.  Physical
    ancilla indices follow the canonical order of the unrotated layout.
    """
    layout = build_layout(d)
    pos_to_anc = {pos: s for s, (pos, _) in enumerate(layout.ancillas)}
    data_map = np.empty(d * d, dtype=np.int64)
    anc_map = np.empty(d * d - 1, dtype=np.int64)
    for k, (r, c) in enumerate(layout.data_qubits):
        for _ in range(orientation % 4):
            r, c = rotate_data(d, r, c)
        data_map[k] = r * d + c
    for s, ((i, j), _) in enumerate(layout.ancillas):
        for _ in range(orientation % 4):
            i, j = rotate_plaquette(d, i, j)
        anc_map[s] = pos_to_anc[(i, j)]
    data_map.setflags(write=False)
    anc_map.setflags(write=False)
    return data_map, anc_map
