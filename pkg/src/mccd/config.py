"""YAML run configuration.

Recognized keys::

    distance            code distance d (3 or 5, any odd d >= 3 works)
    circuit_type        "I" or "II"
    num_logical_qubits  Q
    depths              list of logical depths
    batch_size          trajectories per optimizer step
    learning_rate       Adam step size
    aux_weight          weight of the auxiliary loss
    num_batches         optimizer steps
    stage               1 (single-qubit modules + readouts) or 2 (two-qubit module)
    seed                master seed
    checkpoint_in       stage-1 checkpoint for stage 2 (or the model to evaluate)
    checkpoint_out      where training writes its checkpoint

Optional extras: hidden, pool_size, log_path, shots_per_circuit, shots,
max_weight.
"""

from __future__ import annotations

from dataclasses import fields
from pathlib import Path

import yaml

from .training import ConfigError, TrainConfig

KEYS = ("distance", "circuit_type", "num_logical_qubits", "depths", "batch_size", "learning_rate", "aux_weight",
        "num_batches", "stage", "seed", "checkpoint_in", "checkpoint_out")
EXTRA_KEYS = ("hidden", "pool_size", "log_path", "shots_per_circuit", "shots", "max_weight")


def load_config(path) -> dict:
    data = yaml.safe_load(Path(path).read_text()) or {}
    if not isinstance(data, dict):
        raise ConfigError("config file must hold a mapping")
    unknown = set(data) - set(KEYS) - set(EXTRA_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if data.get("circuit_type") is not None:
        data["circuit_type"] = str(data["circuit_type"])
    return data


def train_config(data: dict, **overrides) -> TrainConfig:
    """Build a TrainConfig from a config mapping; ``None`` overrides are ignored."""
    allowed = {f.name for f in fields(TrainConfig)}
    merged = {k: v for k, v in data.items() if k in allowed}
    merged.update({k: v for k, v in overrides.items() if v is not None})
    if "num_logical_qubits" not in merged:
        merged["num_logical_qubits"] = 2 if merged.get("circuit_type") == "II" else 1
    return TrainConfig(**merged)


def dump_config(cfg: TrainConfig) -> str:
    out = {k: getattr(cfg, k) for k in KEYS}
    out["depths"] = list(cfg.depths)
    return yaml.safe_dump(out, sort_keys=False)
