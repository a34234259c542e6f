"""Circuit-level Pauli noise parameters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Two-qubit Pauli pairs in lexicographic order, identity pair omitted.
PAULI_PAIRS = (
    "IX", "IY", "IZ",
    "XI", "XX", "XY", "XZ",
    "YI", "YX", "YY", "YZ",
    "ZI", "ZX", "ZY", "ZZ",
)
PAULIS_1Q = ("X", "Y", "Z")

# (x, z) symplectic bits of each single-qubit Pauli
_XZ = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}

# component tables: rows are components, columns (x, z) per qubit
COMPONENTS_1Q = np.array([_XZ[p] for p in PAULIS_1Q], dtype=np.uint8)
COMPONENTS_2Q = np.array([_XZ[a] + _XZ[b] for a, b in PAULI_PAIRS], dtype=np.uint8)

NEUTRAL_ATOM_P2Q = (
    0.0005, 0.00175, 0.000625,
    0.0005, 0.0, 0.0, 0.0,
    0.00175, 0.0, 0.0, 0.0,
    0.000625, 0.0, 0.0, 0.00125,
)
NEUTRAL_ATOM_P1Q = (0.0001, 0.0001, 0.0001)
NEUTRAL_ATOM_MOVE = (4e-7, 4e-7, 1.6e-6)
NEUTRAL_ATOM_RESET = 0.002
NEUTRAL_ATOM_MEAS = 0.002


class NoiseModelError(ValueError):
    pass


@dataclass(frozen=True)
class NoiseModel:
    p2q: tuple[float, ...] = NEUTRAL_ATOM_P2Q
    p1q: tuple[float, ...] = NEUTRAL_ATOM_P1Q
    p_move: tuple[float, ...] = NEUTRAL_ATOM_MOVE
    p_reset: float = NEUTRAL_ATOM_RESET
    p_meas: float = NEUTRAL_ATOM_MEAS
    # Also apply movement idling noise on H layers (off by default).
    move_on_h: bool = field(default=False)

    def __post_init__(self):
        object.__setattr__(self, "p2q", tuple(float(p) for p in self.p2q))
        object.__setattr__(self, "p1q", tuple(float(p) for p in self.p1q))
        object.__setattr__(self, "p_move", tuple(float(p) for p in self.p_move))
        if len(self.p2q) != 15:
            raise NoiseModelError("p2q needs 15 entries")
        if len(self.p1q) != 3 or len(self.p_move) != 3:
            raise NoiseModelError("p1q and p_move need 3 entries")
        for name in ("p2q", "p1q", "p_move"):
            probs = getattr(self, name)
            if any(p < 0 or p > 1 for p in probs) or sum(probs) > 1 + 1e-12:
                raise NoiseModelError(f"{name} is not a valid distribution: {probs}")
        for name in ("p_reset", "p_meas"):
            p = getattr(self, name)
            if not 0 <= p <= 1:
                raise NoiseModelError(f"{name}={p} outside [0, 1]")

    @classmethod
    def noiseless(cls) -> "NoiseModel":
        return cls(p2q=(0.0,) * 15, p1q=(0.0,) * 3, p_move=(0.0,) * 3, p_reset=0.0, p_meas=0.0)

    def channel(self, name: str) -> tuple[float, ...]:
        """Probability vector for a named channel.

        Bit-flip channels (``reset``, ``meas``) come back as a one-element
        tuple so every channel is a vector of component probabilities.
        """
        if name == "p2q":
            return self.p2q
        if name == "p1q":
            return self.p1q
        if name == "move":
            return self.p_move
        if name == "reset":
            return (self.p_reset,)
        if name == "meas":
            return (self.p_meas,)
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "p2q": list(self.p2q),
            "p1q": list(self.p1q),
            "p_move": list(self.p_move),
            "p_reset": self.p_reset,
            "p_meas": self.p_meas,
            "move_on_h": self.move_on_h,
        }
