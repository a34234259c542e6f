import numpy as np
import pytest

from mccd.compiler import Instruction, PhysicalCircuit
from mccd.noise import NoiseModel
from mccd.tableau import Tableau, UnsupportedInstructionError, tableau_run

from conftest import compiled


def test_memory_circuit_reference(layout3):
    circuit, pc, _ = compiled("Q=1 D=2 TYPE=I\nI@0\nI@0\n")
    for seed in range(5):
        rec = tableau_run(pc, seed)
        rm = pc.round_meas[0]
        z = layout3.z_indices
        x = layout3.x_indices
        assert not rec[rm[0, z]].any() and not rec[rm[1, z]].any()
        assert np.array_equal(rec[rm[0, x]], rec[rm[1, x]])
        # single data outcomes are random after the X checks; Z parities are not
        data = rec[pc.final_meas[0]].astype(int)
        for s in z:
            assert data[list(layout3.stab_support[s])].sum() % 2 == 0
        assert data[list(layout3.logical_z_support)].sum() % 2 == 0


def test_plus_state_is_random():
    ins = [Instruction("R", np.array([0])), Instruction("H", np.array([0])), Instruction("M", np.array([0]))]
    pc = PhysicalCircuit(1, ins, 1, NoiseModel.noiseless(), 3, 1, 0)
    outs = {int(tableau_run(pc, s)[0]) for s in range(20)}
    assert outs == {0, 1}
    _, mask = tableau_run(pc, 0, return_random_mask=True)
    assert mask[0]


def test_unsupported_instruction():
    pc = PhysicalCircuit(1, [Instruction("T", np.array([0]))], 0, NoiseModel.noiseless(), 3, 1, 0)
    with pytest.raises(UnsupportedInstructionError):
        tableau_run(pc)


def test_gates_keep_tableau_valid(rng):
    t = Tableau(5)
    for _ in range(200):
        op = rng.integers(4)
        a, b = rng.choice(5, 2, replace=False)
        if op == 0:
            t.h(a)
        elif op == 1:
            t.s(a)
        elif op == 2:
            t.cx(a, b)
        else:
            t.measure(int(a), rng)
        assert t.is_valid()


def test_bell_pair_correlated():
    for seed in range(8):
        t = Tableau(2)
        t.h(0)
        t.cx(0, 1)
        rng = np.random.default_rng(seed)
        a, ra = t.measure(0, rng)
        b, rb = t.measure(1, rng)
        assert ra and not rb and a == b
