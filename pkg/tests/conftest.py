import numpy as np
import pytest

from mccd.compiler import build_detector_map, compile_circuit
from mccd.geometry import build_layout
from mccd.logical import LogicalCircuit
from mccd.noise import NoiseModel


@pytest.fixture(scope="session")
def layout3():
    return build_layout(3)


@pytest.fixture(scope="session")
def layout5():
    return build_layout(5)


def compiled(text, d=3, noise=None):
    circuit = LogicalCircuit.from_text(text)
    layout = build_layout(d)
    pc = compile_circuit(circuit, layout, NoiseModel() if noise is None else noise)
    return circuit, pc, build_detector_map(circuit, layout, pc)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
