"""The modular recurrent decoder: gate-specific LSTM cores and shared readouts.

Each logical qubit carries a two-layer LSTM state.  At every layer of the
logical circuit the qubit's new syndrome vector goes through the LSTM
module of the gate applied to it; a CNOT pair goes through one
double-width module fed with the concatenated (control first) inputs and
states, whose outputs are split back in half.  After the last layer a
shared readout maps the top-layer hidden state, concatenated with the
final-round syndrome, to logits for "logical flip / no flip".
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import TAG_CODES, TAG_PAD, SyndromeTrajectory, TrajectoryBatch
from .logical import LogicalCircuit

SINGLE_MODULES = ("I", "X", "Y", "Z", "H")
TWO_MODULE = "CNOT"
MODULES = SINGLE_MODULES + (TWO_MODULE,)
LSTM_PARTS = ("w_x", "w_h", "b_x", "b_h")
READOUT_PARTS = ("w1", "b1", "w2", "b2")

CKPT_MAGIC = b"MCCDCKP1"
CKPT_VERSION = 1
_CKPT_HEADER = struct.Struct("<8sIIII")

DEFAULT_HIDDEN = {3: 64, 5: 192}


class ShapeError(ValueError):
    pass


class CheckpointError(ValueError):
    pass


def sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def param_names() -> list[str]:
    """Fixed traversal order of all parameter tensors (checkpoint order)."""
    names = []
    for m in MODULES:
        for layer in (1, 2):
            names.extend(f"{m}.l{layer}.{p}" for p in LSTM_PARTS)
    for head in ("main", "aux"):
        names.extend(f"{head}.{p}" for p in READOUT_PARTS)
    return names


@dataclass
class ModelParams:
    d: int
    hidden: int
    fx: int
    tensors: dict[str, np.ndarray]

    @property
    def in_size(self) -> int:
        return self.d * self.d - 1

    def shapes(self) -> dict[str, tuple[int, ...]]:
        return expected_shapes(self.d, self.hidden, self.fx)

    def copy(self) -> "ModelParams":
        return ModelParams(self.d, self.hidden, self.fx, {k: v.copy() for k, v in self.tensors.items()})

    def __getitem__(self, name: str) -> np.ndarray:
        return self.tensors[name]

    def flat(self) -> np.ndarray:
        return np.concatenate([self.tensors[n].ravel() for n in param_names()])

    def num_parameters(self) -> int:
        return sum(v.size for v in self.tensors.values())

    def equals(self, other: "ModelParams", names=None) -> bool:
        names = param_names() if names is None else names
        return all(np.array_equal(self.tensors[n], other.tensors[n]) for n in names)

    @staticmethod
    def module_names(module: str) -> list[str]:
        return [n for n in param_names() if n.split(".")[0] == module]


def expected_shapes(d: int, hidden: int, fx: int) -> dict[str, tuple[int, ...]]:
    n_in = d * d - 1
    out = {}
    for m in MODULES:
        width = 2 * hidden if m == TWO_MODULE else hidden
        x_in = 2 * n_in if m == TWO_MODULE else n_in
        for layer, li in ((1, x_in), (2, width)):
            out[f"{m}.l{layer}.w_x"] = (4 * width, li)
            out[f"{m}.l{layer}.w_h"] = (4 * width, width)
            out[f"{m}.l{layer}.b_x"] = (4 * width,)
            out[f"{m}.l{layer}.b_h"] = (4 * width,)
    zm = hidden + fx
    out.update({"main.w1": (zm, zm), "main.b1": (zm,), "main.w2": (2, zm), "main.b2": (2,)})
    out.update({"aux.w1": (hidden, hidden), "aux.b1": (hidden,), "aux.w2": (2, hidden), "aux.b2": (2,)})
    return out


def init_params(d: int, hidden: int | None = None, seed: int = 0, scale: float = 1.0) -> ModelParams:
    """Uniform(-k, k) init with k = 1/sqrt(fan), as common LSTM/linear defaults."""
    hidden = DEFAULT_HIDDEN.get(d, 64) if hidden is None else hidden
    fx = (d * d - 1) // 2
    rng = np.random.default_rng(seed)
    tensors = {}
    for name, shape in expected_shapes(d, hidden, fx).items():
        module = name.split(".")[0]
        if module in MODULES:
            fan = shape[0] // 4
        elif name.endswith(("w1", "b1")):
            fan = expected_shapes(d, hidden, fx)[name.replace("b1", "w1")][1]
        else:
            fan = expected_shapes(d, hidden, fx)[name.replace("b2", "w2")][1]
        k = scale / np.sqrt(fan)
        tensors[name] = rng.uniform(-k, k, size=shape)
    return ModelParams(d, hidden, fx, tensors)


def zero_params(d: int, hidden: int | None = None) -> ModelParams:
    hidden = DEFAULT_HIDDEN.get(d, 64) if hidden is None else hidden
    fx = (d * d - 1) // 2
    return ModelParams(d, hidden, fx, {n: np.zeros(s) for n, s in expected_shapes(d, hidden, fx).items()})


# -- primitives ----------------------------------------------------------------


def lstm_layer(p: ModelParams, module: str, layer: int, x, c, h):
    """One LSTM layer on row-stacked inputs; returns (c', h', cache)."""
    pre = f"{module}.l{layer}."
    w_x, w_h = p[pre + "w_x"], p[pre + "w_h"]
    if x.shape[-1] != w_x.shape[1] or h.shape[-1] != w_h.shape[1] or c.shape != h.shape:
        raise ShapeError(
            f"{module} layer {layer}: x {x.shape}, c {c.shape}, h {h.shape} vs weights {w_x.shape}, {w_h.shape}"
        )
    n = w_h.shape[1]
    a = x @ w_x.T + p[pre + "b_x"] + h @ w_h.T + p[pre + "b_h"]
    i = sigmoid(a[..., :n])
    f = sigmoid(a[..., n:2 * n])
    g = np.tanh(a[..., 2 * n:3 * n])
    o = sigmoid(a[..., 3 * n:])
    c2 = f * c + i * g
    tc = np.tanh(c2)
    h2 = o * tc
    return c2, h2, (x, c, h, i, f, g, o, tc)


def lstm_cell_forward(p: ModelParams, module: str, layer: int, x, state):
    """(c, h) -> (c', h') for a single layer of ``module``."""
    c, h = state
    c2, h2, _ = lstm_layer(p, module, layer, np.asarray(x, float), np.asarray(c, float), np.asarray(h, float))
    return c2, h2


def _module_forward(p, module, x, state):
    (c1, h1), (c2, h2) = state
    c1n, h1n, k1 = lstm_layer(p, module, 1, x, c1, h1)
    c2n, h2n, k2 = lstm_layer(p, module, 2, h1n, c2, h2)
    return ((c1n, h1n), (c2n, h2n)), (k1, k2)


def zero_state(p: ModelParams, *lead) -> tuple:
    z = lambda: np.zeros(lead + (p.hidden,))  # noqa: E731
    return ((z(), z()), (z(), z()))


def step_single(p: ModelParams, gate: str, syndrome, state):
    """Advance one qubit's state through the module of ``gate``."""
    if gate not in SINGLE_MODULES:
        raise KeyError(f"no single-qubit module for gate {gate!r}")
    new, _ = _module_forward(p, gate, np.asarray(syndrome, float), state)
    return new


def _cat(a, b):
    return np.concatenate([a, b], axis=-1)


def step_two(p: ModelParams, state_c, state_t, syn_c, syn_t, module=None):
    """Joint update of a (control, target) pair; returns (state_c', state_t')."""
    H = p.hidden
    for st in (state_c, state_t):
        for c, h in st:
            if c.shape[-1] != H or h.shape[-1] != H:
                raise ShapeError(f"pair states must have hidden size {H}")
    x = _cat(np.asarray(syn_c, float), np.asarray(syn_t, float))
    joint = tuple((_cat(cc, ct), _cat(hc, ht)) for (cc, hc), (ct, ht) in zip(state_c, state_t))
    if module is None:
        new, _ = _module_forward(p, TWO_MODULE, x, joint)
    else:
        new = module(x, joint)
    out_c = tuple((c[..., :H], h[..., :H]) for c, h in new)
    out_t = tuple((c[..., H:], h[..., H:]) for c, h in new)
    return out_c, out_t


def _readout(p, head, z):
    a1 = z @ p[f"{head}.w1"].T + p[f"{head}.b1"]
    r1 = np.maximum(a1, 0.0)
    return r1 @ p[f"{head}.w2"].T + p[f"{head}.b2"], (z, a1, r1)


def readout_main(p: ModelParams, h_final, final_syndrome):
    h_final = np.asarray(h_final, float)
    final_syndrome = np.asarray(final_syndrome, float)
    if h_final.shape[-1] != p.hidden or final_syndrome.shape[-1] != p.fx:
        raise ShapeError("readout input sizes do not match the model")
    return _readout(p, "main", _cat(np.maximum(h_final, 0.0), final_syndrome))[0]


def readout_aux(p: ModelParams, h_final):
    h_final = np.asarray(h_final, float)
    if h_final.shape[-1] != p.hidden:
        raise ShapeError("readout input size does not match the model")
    return _readout(p, "aux", np.maximum(h_final, 0.0))[0]


def softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict_from_logits(logits) -> np.ndarray:
    # ties go to class 0 (no flip)
    return (logits[..., 1] > logits[..., 0]).astype(np.uint8)


# -- whole-trajectory decoding ----------------------------------------------------


class InvocationCounter:
    def __init__(self):
        self.single = 0
        self.two = 0


def decode_trajectory(p: ModelParams, traj: SyndromeTrajectory, circuit: LogicalCircuit,
                      counter: InvocationCounter | None = None):
    """Per-qubit (prediction, flip probability) for one trajectory."""
    Q, D = traj.num_qubits, traj.depth
    if (circuit.num_qubits, circuit.depth) != (Q, D):
        raise ValueError("trajectory and circuit shapes differ")
    syn = traj.syndromes.astype(float)
    states = [zero_state(p) for _ in range(Q)]
    for t, layer in enumerate(circuit.layers):
        for g in layer:
            if g.kind == "CNOT":
                c, tg = g.operands
                if traj.tags[c, t] != TAG_CODES["CNOT_C"] or traj.tags[tg, t] != TAG_CODES["CNOT_T"]:
                    raise ValueError(f"gate tags disagree with circuit at layer {t}")
                states[c], states[tg] = step_two(p, states[c], states[tg], syn[c, t], syn[tg, t])
                if counter:
                    counter.two += 1
            else:
                q = g.operands[0]
                if traj.tags[q, t] != TAG_CODES[g.kind]:
                    raise ValueError(f"gate tags disagree with circuit at layer {t}")
                states[q] = step_single(p, g.kind, syn[q, t], states[q])
                if counter:
                    counter.single += 1
    h_final = np.stack([s[1][1] for s in states])
    logits = readout_main(p, h_final, traj.final.astype(float))
    probs = softmax(logits)[:, 1]
    return predict_from_logits(logits), probs


# -- batched forward with caches (training and bulk evaluation) --------------------


@dataclass
class Inputs:
    """Model-ready arrays for a batch, padded to a common depth."""

    syndromes: np.ndarray  # (N, Q, T, ns) float
    final: np.ndarray  # (N, Q, fx) float
    labels: np.ndarray  # (N, Q) int
    tags: np.ndarray  # (N, Q, T) uint8, TAG_PAD after a trajectory ends
    partners: np.ndarray  # (N, Q, T)

    @classmethod
    def from_batches(cls, batches: list[TrajectoryBatch]) -> "Inputs":
        T = max(b.depth for b in batches)
        syn, fin, lab, tags, par = [], [], [], [], []
        for b in batches:
            pad = T - b.depth
            syn.append(np.pad(b.syndromes, ((0, 0), (0, 0), (0, pad), (0, 0))).astype(float))
            tags.append(np.pad(b.tags, ((0, 0), (0, 0), (0, pad)), constant_values=TAG_PAD))
            par.append(np.pad(b.partners, ((0, 0), (0, 0), (0, pad)), constant_values=255))
            fin.append(b.final.astype(float))
            lab.append(b.labels.astype(np.int64))
        return cls(np.concatenate(syn), np.concatenate(fin), np.concatenate(lab),
                   np.concatenate(tags), np.concatenate(par))

    def __len__(self):
        return self.syndromes.shape[0]


def forward_batch(p: ModelParams, inp: Inputs, keep_cache: bool = True):
    """Run all trajectories; returns (main_logits, aux_logits, cache).

    Logits are shaped (N*Q, 2) with row ``n*Q + q``.
    """
    N, Q, T, ns = inp.syndromes.shape
    H = p.hidden
    R = N * Q
    c1, h1, c2, h2 = (np.zeros((R, H)) for _ in range(4))
    syn = inp.syndromes.reshape(R, T, ns)
    tags = inp.tags.reshape(R, T)
    partners = inp.partners.reshape(R, T).astype(np.int64)
    row_base = np.repeat(np.arange(N) * Q, Q)
    steps = []
    for t in range(T):
        tag_t = tags[:, t]
        calls = []
        for m in SINGLE_MODULES:
            rows = np.flatnonzero(tag_t == TAG_CODES[m])
            if len(rows) == 0:
                continue
            (s1, s2), k = _module_forward(p, m, syn[rows, t], ((c1[rows], h1[rows]), (c2[rows], h2[rows])))
            c1[rows], h1[rows] = s1
            c2[rows], h2[rows] = s2
            calls.append((m, rows, None, k if keep_cache else None))
        ctrl = np.flatnonzero(tag_t == TAG_CODES["CNOT_C"])
        if len(ctrl):
            targ = row_base[ctrl] + partners[ctrl, t]
            x = _cat(syn[ctrl, t], syn[targ, t])
            joint = ((_cat(c1[ctrl], c1[targ]), _cat(h1[ctrl], h1[targ])),
                     (_cat(c2[ctrl], c2[targ]), _cat(h2[ctrl], h2[targ])))
            (s1, s2), k = _module_forward(p, TWO_MODULE, x, joint)
            c1[ctrl], h1[ctrl], c1[targ], h1[targ] = s1[0][:, :H], s1[1][:, :H], s1[0][:, H:], s1[1][:, H:]
            c2[ctrl], h2[ctrl], c2[targ], h2[targ] = s2[0][:, :H], s2[1][:, :H], s2[0][:, H:], s2[1][:, H:]
            calls.append((TWO_MODULE, ctrl, targ, k if keep_cache else None))
        steps.append(calls)
    fin = inp.final.reshape(R, -1)
    main_logits, kmain = _readout(p, "main", _cat(np.maximum(h2, 0.0), fin))
    aux_logits, kaux = _readout(p, "aux", np.maximum(h2, 0.0))
    cache = {"steps": steps, "h_final": h2, "main": kmain, "aux": kaux, "R": R} if keep_cache else None
    return main_logits, aux_logits, cache


# -- checkpoints -----------------------------------------------------------------


def save_checkpoint(path, p: ModelParams) -> None:
    """Header then every tensor as float64 in :func:`param_names` order."""
    with open(Path(path), "wb") as fh:
        fh.write(_CKPT_HEADER.pack(CKPT_MAGIC, CKPT_VERSION, p.d, p.hidden, p.fx))
        fh.write(np.ascontiguousarray(p.flat(), dtype="<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    raw = Path(path).read_bytes()
    if len(raw) < _CKPT_HEADER.size:
        raise CheckpointError("file shorter than header")
    magic, version, d, hidden, fx = _CKPT_HEADER.unpack_from(raw)
    if magic != CKPT_MAGIC:
        raise CheckpointError(f"bad magic {magic!r}")
    if version != CKPT_VERSION:
        raise CheckpointError(f"unsupported version {version}")
    shapes = expected_shapes(d, hidden, fx)
    flat = np.frombuffer(raw[_CKPT_HEADER.size:], dtype="<f8")
    total = sum(int(np.prod(s)) for s in shapes.values())
    if flat.size != total:
        raise CheckpointError(f"expected {total} parameters, found {flat.size}")
    tensors = {}
    o = 0
    for name in param_names():
        size = int(np.prod(shapes[name]))
        tensors[name] = flat[o:o + size].reshape(shapes[name]).astype(np.float64)
        o += size
    return ModelParams(d, hidden, fx, tensors)
