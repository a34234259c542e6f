import numpy as np
import pytest

from mccd.noise import COMPONENTS_2Q, PAULI_PAIRS, NoiseModel, NoiseModelError


def test_default_constants():
    nm = NoiseModel()
    assert nm.p_reset == 0.002 and nm.p_meas == 0.002
    assert nm.p1q == (1e-4, 1e-4, 1e-4)
    assert nm.p_move == (4e-7, 4e-7, 1.6e-6)
    assert len(nm.p2q) == 15
    assert nm.p2q[0] == 0.0005 and nm.p2q[1] == 0.00175 and nm.p2q[14] == 0.00125
    assert nm.p2q == (0.0005, 0.00175, 0.000625, 0.0005, 0, 0, 0, 0.00175, 0, 0, 0, 0.000625, 0, 0, 0.00125)
    assert sum(nm.p2q) == pytest.approx(0.007)


def test_pair_order_and_symmetry():
    assert PAULI_PAIRS[0] == "IX" and PAULI_PAIRS[-1] == "ZZ"
    assert len(set(PAULI_PAIRS)) == 15
    nm = NoiseModel()
    # the vector is symmetric under exchanging the two qubits
    for k, (a, b) in enumerate(PAULI_PAIRS):
        assert nm.p2q[PAULI_PAIRS.index(b + a)] == nm.p2q[k]
    assert COMPONENTS_2Q.shape == (15, 4)


def test_validation():
    with pytest.raises(NoiseModelError):
        NoiseModel(p2q=(0.1,) * 14)
    with pytest.raises(NoiseModelError):
        NoiseModel(p1q=(0.5, 0.5, 0.5))
    with pytest.raises(NoiseModelError):
        NoiseModel(p_meas=1.5)


def test_channels():
    nm = NoiseModel()
    assert nm.channel("reset") == (0.002,)
    assert nm.channel("move") == nm.p_move
    z = NoiseModel.noiseless()
    assert all(sum(z.channel(c)) == 0 for c in ("p2q", "p1q", "move", "reset", "meas"))
