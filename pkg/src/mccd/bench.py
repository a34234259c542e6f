"""Accuracy-versus-depth and wall-time-versus-depth harness."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .compiler import build_detector_map, compile_circuit
from .dataset import TrajectoryBatch, build_trajectory, circuit_from_tags, generate
from .dem import MLEDecoder, extract_dem
from .frame import frame_sample, shot_rng
from .geometry import build_layout
from .logical import sample_mirror
from .model import Inputs, ModelParams, decode_trajectory, forward_batch, predict_from_logits
from .noise import NoiseModel

CSV_HEADER = ("decoder", "d", "type", "depth", "shots", "accuracy", "stderr", "mean_walltime_s")


@dataclass
class BenchRow:
    decoder: str
    d: int
    circuit_type: str
    depth: int
    shots: int
    accuracy: float
    mean_walltime_s: float

    @property
    def stderr(self) -> float:
        a = self.accuracy
        return float(np.sqrt(a * (1 - a) / self.shots)) if self.shots else 0.0


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)
    slope: float | None = None
    intercept: float | None = None
    r2: float | None = None

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow([r.decoder, r.d, r.circuit_type, r.depth, r.shots, f"{r.accuracy:.6f}", f"{r.stderr:.6f}",
                        f"{r.mean_walltime_s:.6e}"])
        return buf.getvalue()

    def to_table(self) -> str:
        lines = [f"{'decoder':8} {'d':>2} {'type':>4} {'depth':>5} {'shots':>7} {'accuracy':>9} {'stderr':>8} {'wall_s':>10}"]
        for r in self.rows:
            lines.append(f"{r.decoder:8} {r.d:>2} {r.circuit_type:>4} {r.depth:>5} {r.shots:>7} "
                         f"{r.accuracy:>9.5f} {r.stderr:>8.5f} {r.mean_walltime_s:>10.3e}")
        if self.r2 is not None:
            lines.append(f"linear fit: time = {self.slope:.3e} * D + {self.intercept:.3e}  (R^2 = {self.r2:.4f})")
        return "\n".join(lines)

    @classmethod
    def from_csv(cls, text: str) -> "BenchReport":
        rows = list(csv.reader(io.StringIO(text)))
        if tuple(rows[0]) != CSV_HEADER:
            raise ValueError(f"unexpected header {rows[0]}")
        return cls([BenchRow(r[0], int(r[1]), r[2], int(r[3]), int(r[4]), float(r[5]), float(r[7])) for r in rows[1:]])


def linear_fit(x, y):
    """Least-squares line; returns (slope, intercept, R^2)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def majority_accuracy(labels) -> float:
    lab = np.asarray(labels).reshape(-1)
    return float(max(lab.mean(), 1 - lab.mean())) if lab.size else 1.0


def model_accuracy(params: ModelParams, batch: TrajectoryBatch, chunk: int = 4096) -> tuple[float, float]:
    """(accuracy, seconds per trajectory) of batched decoding."""
    correct = 0
    t0 = time.perf_counter()
    for s in range(0, len(batch), chunk):
        inp = Inputs.from_batches([batch[s:s + chunk]])
        logits, _, _ = forward_batch(params, inp, keep_cache=False)
        correct += int(np.sum(predict_from_logits(logits) == inp.labels.reshape(-1)))
    elapsed = time.perf_counter() - t0
    return correct / batch.labels.size, elapsed / max(len(batch), 1)


def _default_q(circuit_type: str) -> int:
    return 1 if circuit_type == "I" else 2


def evaluate_accuracy(decoder, d: int, circuit_type: str, depths, shots: int, seed: int,
                      num_qubits: int | None = None, noise: NoiseModel | None = None,
                      max_weight: int = 2, shots_per_circuit: int = 32) -> BenchReport:
    """Accuracy per depth on fresh circuits.

    ``decoder`` is a :class:`ModelParams` (MCCD), the string ``"mle"`` for
    the bounded-weight DEM decoder, or ``"majority"`` for the constant
    no-flip predictor.
    """
    Q = num_qubits or _default_q(circuit_type)
    noise = NoiseModel() if noise is None else noise
    report = BenchReport()
    if isinstance(decoder, ModelParams) and decoder.d != d:
        raise ValueError(f"checkpoint is for d={decoder.d}, asked for d={d}")
    for depth in depths:
        if decoder == "mle":
            acc, wall = _mle_accuracy(d, circuit_type, Q, depth, shots, seed, noise, max_weight, shots_per_circuit)
            name = "mle"
        else:
            batch = generate(d, circuit_type, Q, depth, shots, seed=seed, noise=noise,
                             shots_per_circuit=shots_per_circuit, stream=depth)
            if isinstance(decoder, ModelParams):
                acc, wall = model_accuracy(decoder, batch)
                name = "mccd"
            else:
                t0 = time.perf_counter()
                acc = float(np.mean(batch.labels == 0))
                wall = max((time.perf_counter() - t0) / max(shots, 1), 1e-12)
                name = "majority"
        report.rows.append(BenchRow(name, d, circuit_type, depth, shots, acc, wall))
    return report


def _mle_accuracy(d, circuit_type, Q, depth, shots, seed, noise, max_weight, per_circuit):
    layout = build_layout(d)
    correct = 0
    elapsed = 0.0
    done = 0
    g = 0
    while done < shots:
        rng = shot_rng(seed, depth * 2**32 + g)
        n = min(per_circuit, shots - done)
        circuit = sample_mirror(circuit_type, Q, depth, rng)
        pc = compile_circuit(circuit, layout, noise)
        dmap = build_detector_map(circuit, layout, pc)
        rec = frame_sample(pc, rng, n)
        dets, obs = dmap.evaluate(rec.meas_flips)
        t0 = time.perf_counter()
        pred, _ = MLEDecoder(extract_dem(pc, dmap), max_weight).decode(dets.T)
        elapsed += time.perf_counter() - t0
        correct += int(np.sum(pred == obs.T))
        done += n
        g += 1
    return correct / (shots * Q), elapsed / shots


def benchmark_walltime(params: ModelParams, d: int, circuit_type: str, depths, shots: int, seed: int = 0,
                       num_qubits: int | None = None, noise: NoiseModel | None = None,
                       repeats: int = 5) -> BenchReport:
    """Decode-only time per trajectory, one trajectory at a time.

    Every trajectory is decoded ``repeats`` times, interleaved across depths
    trajectory by trajectory so slow spells on a shared core hit all depths
    alike; its time is the fastest of those passes.  Rows report the mean over
    trajectories.
    """
    Q = num_qubits or _default_q(circuit_type)
    report = BenchReport()
    work = []
    for depth in depths:
        batch = generate(d, circuit_type, Q, depth, shots, seed=seed, noise=noise, stream=depth)
        circuits = [circuit_from_tags(t.tags, t.partners, circuit_type) for t in batch]
        work.append((list(batch), circuits))
    best = np.full((len(work), shots), np.inf)
    correct = np.zeros((len(work), shots), dtype=np.int64)
    clock = time.perf_counter
    for trajs, circuits in work:
        decode_trajectory(params, trajs[0], circuits[0])
    for _ in range(max(repeats, 1)):
        for k in range(shots):
            for i, (trajs, circuits) in enumerate(work):
                t0 = clock()
                pred, _ = decode_trajectory(params, trajs[k], circuits[k])
                best[i, k] = min(best[i, k], clock() - t0)
                correct[i, k] = int(np.sum(pred == trajs[k].labels))
    correct = correct.sum(axis=1)
    for depth, times, hits in zip(depths, best, correct):
        report.rows.append(BenchRow("mccd", d, circuit_type, depth, shots, hits / (shots * Q), float(times.mean())))
    if len(depths) >= 2:
        report.slope, report.intercept, report.r2 = linear_fit(depths, [r.mean_walltime_s for r in report.rows])
    return report


__all__ = ["BenchRow", "BenchReport", "CSV_HEADER", "linear_fit", "majority_accuracy", "model_accuracy",
           "evaluate_accuracy", "benchmark_walltime", "build_trajectory"]
