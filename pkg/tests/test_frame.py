import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mccd.compiler import Instruction, PhysicalCircuit
from mccd.frame import (
    ChannelArityError,
    PauliFrame,
    apply_pauli_channel,
    bernoulli_positions,
    frame_sample,
    pack_bits,
    popcount_rows,
    propagate_gate,
    shot_rng,
    unpack_bits,
)
from mccd.noise import NoiseModel


def one_shot_frame(n, x=(), z=()):
    f = PauliFrame(n, 1)
    for q in x:
        f.xor_events("x", np.array([q]), np.array([0]))
    for q in z:
        f.xor_events("z", np.array([q]), np.array([0]))
    return f


def bits(f):
    return f.x_bits()[:, 0].astype(int).tolist(), f.z_bits()[:, 0].astype(int).tolist()


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 200), st.integers(1, 5), st.integers(0, 2**31))
def test_pack_roundtrip(shots, rows, seed):
    b = np.random.default_rng(seed).integers(0, 2, (rows, shots)).astype(bool)
    words = pack_bits(b)
    assert np.array_equal(unpack_bits(words, shots), b)
    assert np.array_equal(popcount_rows(words), b.sum(axis=1))


def test_cnot_propagation():
    f = propagate_gate(one_shot_frame(2, x=[0]), "CX", np.array([[0, 1]]))
    assert bits(f) == ([1, 1], [0, 0])
    f = propagate_gate(one_shot_frame(2, z=[1]), "CX", np.array([[0, 1]]))
    assert bits(f) == ([0, 0], [1, 1])


def test_hadamard_and_cz():
    f = propagate_gate(one_shot_frame(1, x=[0]), "H", np.array([0]))
    assert bits(f) == ([0], [1])
    f = propagate_gate(one_shot_frame(2, x=[0]), "CZ", np.array([[0, 1]]))
    assert bits(f) == ([1, 0], [0, 1])


def test_paulis_are_noops_and_reset_clears():
    f = one_shot_frame(1, x=[0], z=[0])
    for g in "IXYZ":
        propagate_gate(f, g, np.array([0]))
    assert bits(f) == ([1], [1])
    propagate_gate(f, "R", np.array([0]))
    assert bits(f) == ([0], [0])


def test_channel_edge_cases(rng):
    f = PauliFrame(3, 100)
    apply_pauli_channel(f, np.arange(3), (0, 0, 0), rng)
    assert not f.x.any() and not f.z.any()
    apply_pauli_channel(f, np.arange(3), (1, 0, 0), rng)
    assert f.x_bits().all() and not f.z_bits().any()
    with pytest.raises(ChannelArityError):
        apply_pauli_channel(f, np.arange(3), (0.1, 0.1), rng)
    with pytest.raises(ChannelArityError):
        apply_pauli_channel(f, np.arange(3), (0.0,) * 15, rng)


def test_single_qubit_channel_statistics():
    f = PauliFrame(10, 1_000_000)
    apply_pauli_channel(f, np.arange(10), (1e-4, 1e-4, 1e-4), np.random.default_rng(3))
    n = 10 * 1_000_000
    x, z = f.x_bits(), f.z_bits()
    sigma = np.sqrt(1e-4 * (1 - 1e-4) / n)
    for rate in ((x & ~z).sum() / n, (x & z).sum() / n, (~x & z).sum() / n):
        assert abs(rate - 1e-4) < 5 * sigma


@pytest.mark.parametrize("p", [0.0, 1e-3, 0.02, 0.3, 1.0])
def test_bernoulli_positions(p):
    rng = np.random.default_rng(1)
    n = 200_000
    pos = bernoulli_positions(rng, n, p)
    assert np.all(np.diff(pos) > 0) and (len(pos) == 0 or pos[-1] < n)
    assert abs(len(pos) / n - p) < 5 * np.sqrt(p * (1 - p) / n) + 1e-12


def reset_measure(noise):
    ins = [Instruction("R", np.array([0])), Instruction("XERR", np.array([0]), "reset"),
           Instruction("M", np.array([0]), "meas")]
    return PhysicalCircuit(1, ins, 1, noise, 3, 1, 0, final_meas=np.zeros((1, 0), dtype=np.int64))


def test_reset_flip_rate():
    n = 1_000_000
    rec = frame_sample(reset_measure(NoiseModel(p_meas=0.0)), np.random.default_rng(5), n)
    sigma = np.sqrt(0.002 * 0.998 / n)
    assert abs(rec.meas_flips.mean() - 0.002) < 5 * sigma


def test_zero_noise_sample_is_zero(rng):
    rec = frame_sample(reset_measure(NoiseModel.noiseless()), rng, 500)
    assert not rec.meas_flips.any()


def test_shot_rng_streams_independent_of_order():
    a = shot_rng(9, 3).integers(0, 2**32, 4)
    shot_rng(9, 1).integers(0, 2**32, 4)
    assert np.array_equal(a, shot_rng(9, 3).integers(0, 2**32, 4))
    assert not np.array_equal(a, shot_rng(9, 4).integers(0, 2**32, 4))
