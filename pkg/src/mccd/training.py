"""Loss, hand-derived backward pass, Adam, and the two-stage curriculum."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import TrajectoryBatch, generate
from .model import (
    MODULES,
    SINGLE_MODULES,
    TWO_MODULE,
    Inputs,
    ModelParams,
    forward_batch,
    init_params,
    load_checkpoint,
    param_names,
    save_checkpoint,
)
from .noise import NoiseModel

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


@dataclass
class TrainConfig:
    distance: int = 3
    circuit_type: str = "I"
    num_logical_qubits: int = 1
    depths: tuple[int, ...] = (2, 4)
    batch_size: int = 1024
    learning_rate: float = 1e-3
    aux_weight: float = 0.5
    num_batches: int = 100
    stage: int = 1
    seed: int = 0
    hidden: int | None = None
    checkpoint_in: str | None = None
    checkpoint_out: str | None = None
    log_path: str | None = None
    shots_per_circuit: int = 32
    pool_size: int | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        self.depths = tuple(int(x) for x in self.depths)
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.aux_weight < 0:
            raise ConfigError("aux_weight must be non-negative")
        if self.stage not in (1, 2):
            raise ConfigError("stage must be 1 or 2")
        if self.stage == 1 and self.circuit_type != "I":
            raise ConfigError("stage 1 trains on Type I circuits only")
        if self.stage == 2 and self.circuit_type != "II":
            raise ConfigError("stage 2 trains on Type II circuits only")
        if self.stage == 2 and not self.checkpoint_in:
            raise ConfigError("stage 2 needs a stage-1 checkpoint")
        if self.batch_size < 1 or self.num_batches < 0 or not self.depths:
            raise ConfigError("batch_size, num_batches and depths must be positive")
        if self.pool_size is not None and self.pool_size < len(self.depths):
            raise ConfigError("pool_size must cover every depth")


# -- loss ----------------------------------------------------------------------


def _log_softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(logits, labels) -> np.ndarray:
    logits = np.atleast_2d(np.asarray(logits, float))
    labels = np.atleast_1d(np.asarray(labels, np.int64))
    return -_log_softmax(logits)[np.arange(len(labels)), labels]


def loss(main_logits, aux_logits, label, aux_weight: float = 0.5) -> float:
    """Mean of CE(main) + aux_weight * CE(aux) over all rows."""
    ce_m = cross_entropy(main_logits, label)
    ce_a = cross_entropy(aux_logits, label)
    return float(np.mean(ce_m + aux_weight * ce_a))


# -- backward ---------------------------------------------------------------------


def _zeros_like(p: ModelParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in p.tensors.items()}


def _lstm_back(p, grads, module, layer, cache, dc2, dh2):
    x, c, h, i, f, g, o, tc = cache
    pre = f"{module}.l{layer}."
    do = dh2 * tc
    dc = dc2 + dh2 * o * (1.0 - tc * tc)
    da = np.concatenate([dc * g * i * (1.0 - i), dc * c * f * (1.0 - f), dc * i * (1.0 - g * g), do * o * (1.0 - o)],
                        axis=1)
    grads[pre + "w_x"] += da.T @ x
    grads[pre + "w_h"] += da.T @ h
    db = da.sum(axis=0)
    grads[pre + "b_x"] += db
    grads[pre + "b_h"] += db
    return da @ p[pre + "w_x"], dc * f, da @ p[pre + "w_h"]


def _readout_back(p, grads, head, cache, g):
    z, a1, r1 = cache
    grads[f"{head}.w2"] += g.T @ r1
    grads[f"{head}.b2"] += g.sum(axis=0)
    da1 = (g @ p[f"{head}.w2"]) * (a1 > 0)
    grads[f"{head}.w1"] += da1.T @ z
    grads[f"{head}.b1"] += da1.sum(axis=0)
    return da1 @ p[f"{head}.w1"]


def loss_and_grads(p: ModelParams, inp: Inputs, aux_weight: float = 0.5, parts: dict | None = None):
    """Mean batch loss and its exact gradient w.r.t. every parameter.

    If ``parts`` is given it receives the unweighted main and aux losses.
    """
    main_logits, aux_logits, cache = forward_batch(p, inp)
    labels = inp.labels.reshape(-1)
    R = len(labels)
    ce_m = cross_entropy(main_logits, labels)
    ce_a = cross_entropy(aux_logits, labels)
    value = float(np.mean(ce_m + aux_weight * ce_a))
    if parts is not None:
        parts["main"], parts["aux"] = float(ce_m.mean()), float(ce_a.mean())
    onehot = np.zeros((R, 2))
    onehot[np.arange(R), labels] = 1.0
    sm = lambda lg: np.exp(_log_softmax(lg))  # noqa: E731
    g_main = (sm(main_logits) - onehot) / R
    g_aux = aux_weight * (sm(aux_logits) - onehot) / R

    grads = _zeros_like(p)
    H = p.hidden
    h2 = cache["h_final"]
    dz = _readout_back(p, grads, "main", cache["main"], g_main)
    dza = _readout_back(p, grads, "aux", cache["aux"], g_aux)
    dh2 = (dz[:, :H] + dza) * (h2 > 0)
    dc2 = np.zeros_like(dh2)
    dh1 = np.zeros_like(dh2)
    dc1 = np.zeros_like(dh2)

    for calls in reversed(cache["steps"]):
        for module, rows, targ, (k1, k2) in reversed(calls):
            if targ is None:
                idx = rows
                pick = lambda a: a[idx]  # noqa: E731
            else:
                idx = np.concatenate([rows, targ])
                pick = lambda a: np.concatenate([a[rows], a[targ]], axis=1)  # noqa: E731
            dx2, dc2p, dh2p = _lstm_back(p, grads, module, 2, k2, pick(dc2), pick(dh2))
            _, dc1p, dh1p = _lstm_back(p, grads, module, 1, k1, pick(dc1), pick(dh1) + dx2)
            if targ is None:
                dc2[rows], dh2[rows], dc1[rows], dh1[rows] = dc2p, dh2p, dc1p, dh1p
            else:
                for arr, val in ((dc2, dc2p), (dh2, dh2p), (dc1, dc1p), (dh1, dh1p)):
                    arr[rows] = val[:, :H]
                    arr[targ] = val[:, H:]
    return value, grads


def backward(p: ModelParams, inp: Inputs, aux_weight: float = 0.5) -> dict[str, np.ndarray]:
    return loss_and_grads(p, inp, aux_weight)[1]


def grad_check(p: ModelParams, inp: Inputs, eps: float = 1e-5, aux_weight: float = 0.5,
               names=None, max_per_tensor: int | None = None, seed: int = 0, floor: float = 1e-5):
    """Max relative error between backward and central differences.

    Relative error is |a - n| / max(|a| + |n|, floor); the floor keeps
    coordinates whose true gradient is tiny from dividing roundoff (about
    1e-16 / eps) by roundoff.
    ``max_per_tensor`` samples that many coordinates per tensor.
    Returns (max_err, per-tensor max errors).
    """
    _, grads = loss_and_grads(p, inp, aux_weight)
    q = p.copy()
    rng = np.random.default_rng(seed)
    per = {}
    for name in names or param_names():
        t = q.tensors[name]
        flat = t.reshape(-1)
        coords = np.arange(flat.size)
        if max_per_tensor is not None and flat.size > max_per_tensor:
            coords = rng.choice(flat.size, max_per_tensor, replace=False)
        worst = 0.0
        for k in coords:
            old = flat[k]
            flat[k] = old + eps
            lp = loss(*forward_batch(q, inp, keep_cache=False)[:2], inp.labels.reshape(-1), aux_weight)
            flat[k] = old - eps
            lm = loss(*forward_batch(q, inp, keep_cache=False)[:2], inp.labels.reshape(-1), aux_weight)
            flat[k] = old
            num = (lp - lm) / (2 * eps)
            ana = grads[name].reshape(-1)[k]
            err = abs(ana - num) / max(abs(ana) + abs(num), floor)
            worst = max(worst, err)
        per[name] = worst
    return max(per.values()), per


def audit_inputs(d: int = 3, seed: int = 0) -> Inputs:
    """Four two-qubit, depth-2 samples that route through every module.

    Syndromes and labels are random bits: the gradient audit only needs
    the computation graph, not physically consistent data.
    """
    from .dataset import TAG_CODES as T

    rng = np.random.default_rng(seed)
    ns, nz = d * d - 1, (d * d - 1) // 2
    tags = np.array([
        [[T["I"], T["CNOT_C"]], [T["X"], T["CNOT_T"]]],
        [[T["Y"], T["H"]], [T["Z"], T["I"]]],
        [[T["CNOT_T"], T["H"]], [T["CNOT_C"], T["Y"]]],
        [[T["H"], T["CNOT_T"]], [T["Z"], T["CNOT_C"]]],
    ], dtype=np.uint8)
    partners = np.where(np.isin(tags, (T["CNOT_C"], T["CNOT_T"])), 1 - np.arange(2)[None, :, None], 255).astype(np.uint8)
    return Inputs(rng.integers(0, 2, (4, 2, 2, ns)).astype(float), rng.integers(0, 2, (4, 2, nz)).astype(float),
                  np.array([[0, 1], [1, 0], [1, 1], [0, 1]]), tags, partners)


# -- Adam -------------------------------------------------------------------------


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, p: ModelParams, names=None, **kw) -> "AdamState":
        names = param_names() if names is None else names
        return cls({n: np.zeros_like(p[n]) for n in names}, {n: np.zeros_like(p[n]) for n in names}, **kw)


def adam_step(p: ModelParams, grads: dict[str, np.ndarray], state: AdamState, lr: float) -> None:
    """Bias-corrected Adam, in place, over the names tracked by ``state``."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.step
    c2 = 1.0 - b2 ** state.step
    for n in state.m:
        g = grads[n]
        if g.shape != p[n].shape:
            raise ValueError(f"gradient shape mismatch for {n}")
        state.m[n] = b1 * state.m[n] + (1 - b1) * g
        state.v[n] = b2 * state.v[n] + (1 - b2) * g * g
        p.tensors[n] -= lr * (state.m[n] / c1) / (np.sqrt(state.v[n] / c2) + state.eps)


def trainable_names(stage: int) -> list[str]:
    if stage == 1:
        return [n for n in param_names() if n.split(".")[0] != TWO_MODULE]
    return [n for n in param_names() if n.split(".")[0] == TWO_MODULE]


def mask_grads(grads: dict[str, np.ndarray], keep) -> dict[str, np.ndarray]:
    keep = set(keep)
    return {n: (g if n in keep else np.zeros_like(g)) for n, g in grads.items()}


# -- data stream ---------------------------------------------------------------------


def training_batch(cfg: TrainConfig, index: int, noise: NoiseModel | None = None) -> list[TrajectoryBatch]:
    """Batch ``index`` of the seeded stream; depth drawn uniformly per trajectory."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(1 << 20, index)))
    picks = rng.integers(len(cfg.depths), size=cfg.batch_size)
    out = []
    for j, depth in enumerate(cfg.depths):
        count = int(np.sum(picks == j))
        if count:
            out.append(generate(cfg.distance, cfg.circuit_type, cfg.num_logical_qubits, depth, count,
                                seed=cfg.seed, noise=noise, shots_per_circuit=cfg.shots_per_circuit,
                                stream=1 + index * len(cfg.depths) + j))
    return out


class PoolSource:
    """Batches drawn from a fixed, seeded pool of trajectories.

    The pool holds ``pool_size`` trajectories split evenly over the depths.
    Each batch draws a depth uniformly per trajectory, then a trajectory of
    that depth uniformly from the pool.
    """

    def __init__(self, cfg: TrainConfig, noise: NoiseModel | None = None):
        self.cfg = cfg
        per = cfg.pool_size // len(cfg.depths)
        self.pools = [generate(cfg.distance, cfg.circuit_type, cfg.num_logical_qubits, depth, per,
                               seed=cfg.seed, noise=noise, shots_per_circuit=cfg.shots_per_circuit,
                               stream=(1 << 30) + j)
                      for j, depth in enumerate(cfg.depths)]

    def __call__(self, index: int) -> list[TrajectoryBatch]:
        rng = np.random.default_rng(np.random.SeedSequence(self.cfg.seed, spawn_key=(1 << 21, index)))
        picks = rng.integers(len(self.pools), size=self.cfg.batch_size)
        out = []
        for j, pool in enumerate(self.pools):
            count = int(np.sum(picks == j))
            if count:
                out.append(pool[np.sort(rng.integers(len(pool), size=count))])
        return out


@dataclass
class TrainResult:
    params: ModelParams
    losses: list[tuple[int, float, float, float]] = field(default_factory=list)
    seconds: float = 0.0


def _train(cfg: TrainConfig, params: ModelParams, names, noise, batch_source) -> TrainResult:
    if batch_source is None and cfg.pool_size:
        batch_source = PoolSource(cfg, noise)
    state = AdamState.zeros(params, names, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.eps)
    result = TrainResult(params)
    t0 = time.perf_counter()
    fh = open(cfg.log_path, "w") if cfg.log_path else None
    try:
        if fh:
            fh.write("step,loss_main,loss_aux,loss_total\n")
        for k in range(cfg.num_batches):
            parts = batch_source(k) if batch_source else training_batch(cfg, k, noise)
            for b in parts:
                if b.d != cfg.distance or b.num_qubits != cfg.num_logical_qubits:
                    raise ConfigError("batch shape does not match config")
            inp = Inputs.from_batches(parts)
            comp = {}
            total, grads = loss_and_grads(params, inp, cfg.aux_weight, comp)
            lm, la = comp["main"], comp["aux"]
            if fh:
                fh.write(f"{k},{lm:.8f},{la:.8f},{total:.8f}\n")
            result.losses.append((k, lm, la, total))
            adam_step(params, mask_grads(grads, names), state, cfg.learning_rate)
            if k % 50 == 0:
                log.info("batch %d loss %.5f", k, total)
    finally:
        if fh:
            fh.close()
    result.seconds = time.perf_counter() - t0
    if cfg.checkpoint_out:
        save_checkpoint(cfg.checkpoint_out, params)
    return result


def train_stage1(cfg: TrainConfig, noise: NoiseModel | None = None, batch_source=None,
                 init: ModelParams | None = None) -> TrainResult:
    """Train the five single-qubit modules and both readouts on Type I data."""
    if cfg.stage != 1 or cfg.circuit_type != "I":
        raise ConfigError("train_stage1 needs stage=1 and Type I data")
    params = init if init is not None else init_params(cfg.distance, cfg.hidden, seed=cfg.seed)
    return _train(cfg, params, trainable_names(1), noise, batch_source)


def train_stage2(cfg: TrainConfig, stage1: ModelParams | str | Path | None = None,
                 noise: NoiseModel | None = None, batch_source=None) -> TrainResult:
    """Train only the two-qubit module; everything else stays bit-identical."""
    if cfg.stage != 2 or cfg.circuit_type != "II":
        raise ConfigError("train_stage2 needs stage=2 and Type II data")
    src = stage1 if stage1 is not None else cfg.checkpoint_in
    params = load_checkpoint(src) if isinstance(src, (str, Path)) else src.copy()
    if params.d != cfg.distance:
        raise ConfigError(f"checkpoint is for d={params.d}, config says d={cfg.distance}")
    if cfg.hidden is not None and cfg.hidden != params.hidden:
        raise ConfigError("checkpoint hidden size differs from config")
    return _train(cfg, params, trainable_names(2), noise, batch_source)


__all__ = [
    "TrainConfig", "ConfigError", "AdamState", "TrainResult", "cross_entropy", "loss", "loss_and_grads",
    "backward", "grad_check", "audit_inputs", "adam_step", "trainable_names", "mask_grads", "training_batch", "PoolSource",
    "train_stage1", "train_stage2", "MODULES", "SINGLE_MODULES",
]
