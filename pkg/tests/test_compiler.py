import numpy as np
import pytest

from mccd.compiler import build_detector_map, compile_circuit
from mccd.frame import Injections, frame_sample, run_frames, unpack_bits
from mccd.geometry import build_layout
from mccd.logical import LogicalCircuit, sample_mirror
from mccd.noise import NoiseModel

from conftest import compiled


def test_single_layer_counts():
    _, pc, dmap = compiled("Q=1 D=1 TYPE=I\nI@0\n")
    assert pc.num_measurements == 8 + 9
    idle = [ins for ins in pc.instructions if ins.name == "I"]
    assert len(idle) == 1 and len(idle[0].targets) == 9
    assert pc.count("M") == 17


def test_transversal_cnot_layer():
    _, pc, _ = compiled("Q=2 D=1 TYPE=II\nCNOT@0,1\n")
    names = [ins.name for ins in pc.instructions]
    k = names.index("CX")
    cx = pc.instructions[k]
    assert cx.targets.shape == (9, 2)
    assert pc.instructions[k + 1].name == "PAULI2" and pc.instructions[k + 1].channel == "p2q"
    move = pc.instructions[k - 1]
    assert move.name == "PAULI1" and move.channel == "move" and len(move.targets) == 18
    assert names.index("M") > k
    # control block data pairs with target block data at the same code position
    assert np.array_equal(cx.targets[:, 1] - cx.targets[:, 0], np.full(9, 17))


def test_no_movement_on_single_qubit_layers():
    _, pc, _ = compiled("Q=1 D=2 TYPE=I\nH@0\nH@0\n")
    assert not any(ins.channel == "move" for ins in pc.instructions)
    _, pc, _ = compiled("Q=1 D=2 TYPE=I\nH@0\nH@0\n", noise=NoiseModel(move_on_h=True))
    assert any(ins.channel == "move" for ins in pc.instructions)


@pytest.mark.parametrize("ctype,q,depth", [("I", 1, 6), ("II", 2, 8), ("II", 4, 4)])
def test_zero_noise_zero_detectors(ctype, q, depth, layout3):
    rng = np.random.default_rng(depth)
    c = sample_mirror(ctype, q, depth, rng)
    pc = compile_circuit(c, layout3, NoiseModel.noiseless())
    dmap = build_detector_map(c, layout3, pc)
    rec = frame_sample(pc, rng, 300, randomize_gauge=True)
    dets, obs = dmap.evaluate(rec.meas_flips)
    assert not dets.any() and not obs.any()


def test_measurement_flip_hits_consecutive_rounds(layout3):
    _, pc, dmap = compiled("Q=1 D=4 TYPE=I\nI@0\nI@0\nI@0\nI@0\n")
    s = layout3.z_indices[1]
    m_ins = [k for k, ins in enumerate(pc.instructions) if ins.name == "M"]
    k = m_ins[1]  # round index 1
    flips = unpack_bits(run_frames(pc, 1, Injections({k: (np.array([s]), np.array([0]), np.array([0]))})), 1)
    dets, obs = dmap.evaluate(flips)
    hit = set(np.flatnonzero(dets[:, 0]).tolist())
    assert hit == {dmap.det_index(0, 1, s), dmap.det_index(0, 2, s)}
    assert not obs.any()


def test_bulk_data_flip_before_first_round(layout3):
    _, pc, dmap = compiled("Q=1 D=2 TYPE=I\nI@0\nI@0\n")
    center = layout3.data_index(1, 1)
    k = next(k for k, ins in enumerate(pc.instructions) if ins.name == "XERR")
    flips = unpack_bits(run_frames(pc, 1, Injections({k: (np.array([center]), np.array([0]), np.array([0]))})), 1)
    dets, obs = dmap.evaluate(flips)
    hit = np.flatnonzero(dets[:, 0])
    z_round0 = [dmap.det_index(0, 0, s) for s in layout3.z_indices]
    assert len(hit) == 2 and set(hit) <= set(z_round0)
    assert not obs.any()


def test_logical_chain_sets_label_only(layout3):
    # X on the whole logical-Z support right after data reset
    _, pc, dmap = compiled("Q=1 D=2 TYPE=I\nI@0\nI@0\n")
    k = next(k for k, ins in enumerate(pc.instructions) if ins.name == "XERR")
    chain = np.array(layout3.logical_x_support)
    flips = unpack_bits(run_frames(pc, 1, Injections({k: (chain, np.zeros(len(chain), int), np.zeros(len(chain), int))})), 1)
    dets, obs = dmap.evaluate(flips)
    assert not dets.any() and obs[0, 0]
