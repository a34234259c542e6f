"""Simulation and decoding of noisy logical Clifford circuits on the rotated surface code."""

from .geometry import CodeLayout, build_layout
from .noise import NoiseModel
from .logical import LogicalCircuit, LogicalGate, sample_mirror
from .compiler import DetectorMap, PhysicalCircuit, build_detector_map, compile_circuit
from .dataset import TrajectoryBatch, generate, read_dataset, write_dataset
from .model import ModelParams, decode_trajectory, init_params, load_checkpoint, save_checkpoint
from .training import TrainConfig, train_stage1, train_stage2
from .dem import DetectorErrorModel, MLEDecoder, extract_dem, mle_decode

__version__ = "0.1.0"
