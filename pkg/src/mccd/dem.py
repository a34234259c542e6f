"""Detector error models and a bounded-weight most-likely-error decoder."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
from scipy import sparse

from .compiler import NOISE_OPS, DetectorMap, PhysicalCircuit
from .frame import Injections, bernoulli_positions, run_frames, unpack_bits

MAX_ENUMERATION = 10**7


class InstanceTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class Fault:
    p: float
    dets: tuple[int, ...]
    obs: tuple[int, ...]


@dataclass
class DetectorErrorModel:
    faults: list[Fault]
    num_detectors: int
    num_observables: int

    def __len__(self):
        return len(self.faults)

    @property
    def probabilities(self) -> np.ndarray:
        return np.array([f.p for f in self.faults], dtype=np.float64)

    def matrices(self):
        """Sparse (faults x detectors) and (faults x observables) incidence."""
        def build(attr, n):
            rows, cols = [], []
            for k, f in enumerate(self.faults):
                idx = getattr(f, attr)
                rows.extend([k] * len(idx))
                cols.extend(idx)
            data = np.ones(len(rows), dtype=np.uint8)
            return sparse.csr_matrix((data, (rows, cols)), shape=(len(self.faults), n), dtype=np.uint8)
        return build("dets", self.num_detectors), build("obs", self.num_observables)

    def to_text(self) -> str:
        lines = []
        for f in self.faults:
            d = ",".join(map(str, f.dets))
            o = ",".join(map(str, f.obs))
            lines.append(f"{f.p:.12g} Δ:{{{d}}} Λ:{{{o}}}")
        return "\n".join(lines) + ("\n" if lines else "")

    def sample(self, shots: int, rng: np.random.Generator):
        """Fire each fault independently; returns (dets, obs) as (shots, n) bool."""
        dm, om = self.matrices()
        rows, cols = [], []
        for k, p in enumerate(self.probabilities):
            s = bernoulli_positions(rng, shots, p)
            rows.append(s)
            cols.append(np.full(len(s), k))
        rows = np.concatenate(rows) if rows else np.empty(0, np.int64)
        cols = np.concatenate(cols) if cols else np.empty(0, np.int64)
        fired = sparse.csr_matrix((np.ones(len(rows), np.int64), (rows, cols)), shape=(shots, len(self.faults)))
        dets = (fired @ dm.astype(np.int64)).toarray() & 1
        obs = (fired @ om.astype(np.int64)).toarray() & 1
        return dets.astype(bool), obs.astype(bool)


def merge_probability(pa: float, pb: float) -> float:
    """Probability that exactly one of two independent events fires."""
    return pa * (1 - pb) + pb * (1 - pa)


def _fault_table(circuit: PhysicalCircuit):
    """Injection table with one shot per (noise site, component)."""
    table = {}
    probs = []
    shot = 0
    for k, ins in enumerate(circuit.instructions):
        if ins.name not in NOISE_OPS and not (ins.name == "M" and ins.channel):
            continue
        channel = np.asarray(circuit.noise.channel(ins.channel), dtype=np.float64)
        comps = np.flatnonzero(channel > 0)
        if len(comps) == 0:
            continue
        n = ins.num_sites * len(comps)
        sites = np.repeat(np.arange(ins.num_sites), len(comps))
        comp = np.tile(comps, ins.num_sites)
        table[k] = (sites, np.arange(shot, shot + n), comp)
        probs.append(channel[comp])
        shot += n
    probs = np.concatenate(probs) if probs else np.empty(0)
    return table, probs, shot


def extract_dem(circuit: PhysicalCircuit, dmap: DetectorMap) -> DetectorErrorModel:
    """Propagate every single fault component and collect its signature."""
    n_det = dmap.detector_matrix.shape[0]
    n_obs = dmap.observable_matrix.shape[0]
    table, probs, shots = _fault_table(circuit)
    if shots == 0:
        return DetectorErrorModel([], n_det, n_obs)
    rec = unpack_bits(run_frames(circuit, shots, Injections(table)), shots)
    dets, obs = dmap.evaluate(rec)
    merged: dict[tuple, float] = {}
    for s in range(shots):
        key = (tuple(np.flatnonzero(dets[:, s]).tolist()), tuple(np.flatnonzero(obs[:, s]).tolist()))
        if not key[0] and not key[1]:
            continue
        p = float(probs[s])
        merged[key] = merge_probability(merged[key], p) if key in merged else p
    faults = [Fault(p, dk, ok) for (dk, ok), p in sorted(merged.items())]
    return DetectorErrorModel(faults, n_det, n_obs)


# -- decoding ------------------------------------------------------------------


def _bits(indices) -> int:
    v = 0
    for i in indices:
        v |= 1 << int(i)
    return v


def _pattern(row) -> int:
    return _bits(np.flatnonzero(row))


class MLEDecoder:
    """Most likely fault subset of bounded size explaining the detectors.

    A subset's likelihood is proportional to the product of p/(1-p) over its
    members.  Subsets of size w are found by enumerating all (w-1)-subsets
    and looking up the remaining fault by its detector pattern.  Ties go to
    the smaller subset, then to the lexicographically first one.
    """

    def __init__(self, dem: DetectorErrorModel, max_weight: int = 2):
        if max_weight < 1:
            raise ValueError("max_weight must be at least 1")
        n = len(dem)
        if comb(n, max_weight) > MAX_ENUMERATION:
            raise InstanceTooLargeError(f"C({n}, {max_weight}) exceeds {MAX_ENUMERATION}")
        self.dem = dem
        self.max_weight = max_weight
        p = dem.probabilities
        self.score = np.log(p) - np.log1p(-p)
        self.det = [_bits(f.dets) for f in dem.faults]
        self.obs = [_bits(f.obs) for f in dem.faults]
        by_det: dict[int, list[int]] = {}
        for k, v in enumerate(self.det):
            by_det.setdefault(v, []).append(k)
        # best member for each pattern, sorted by descending score
        self.by_det = {v: sorted(ks, key=lambda k: (-self.score[k], k)) for v, ks in by_det.items()}

    def decode_pattern(self, target: int):
        """(observable bitset, found) for a detector bitset."""
        if target == 0:
            return 0, True
        best = None  # (score, weight, subset)
        for w in range(1, self.max_weight + 1):
            for head in combinations(range(len(self.det)), w - 1):
                rest = target
                s = 0.0
                for k in head:
                    rest ^= self.det[k]
                    s += self.score[k]
                for last in self.by_det.get(rest, ()):
                    if head and last <= head[-1]:
                        continue
                    cand = (s + self.score[last], w, head + (last,))
                    if best is None or cand[0] > best[0] or (cand[0] == best[0] and cand[1:] < best[1:]):
                        best = cand
                    break
        if best is None:
            return 0, False
        o = 0
        for k in best[2]:
            o ^= self.obs[k]
        return o, True

    def decode(self, dets: np.ndarray):
        """Decode (shots, n_det) detector rows; returns (obs (shots, n_obs) bool, found)."""
        dets = np.atleast_2d(np.asarray(dets, dtype=bool))
        n_obs = self.dem.num_observables
        out = np.zeros((len(dets), n_obs), dtype=bool)
        found = np.zeros(len(dets), dtype=bool)
        cache: dict[int, tuple[int, bool]] = {}
        for i, row in enumerate(dets):
            key = _pattern(row)
            if key not in cache:
                cache[key] = self.decode_pattern(key)
            o, found[i] = cache[key]
            out[i] = [(o >> j) & 1 for j in range(n_obs)]
        return out, found


def mle_decode(dem: DetectorErrorModel, dets, max_weight: int = 2):
    """Convenience wrapper: per-observable prediction and found flags."""
    return MLEDecoder(dem, max_weight).decode(dets)


class ExhaustiveDecoder:
    """Reference decoder: tabulates every fault subset of size <= max_weight.

    Patterns are packed into one int64 key, so this only handles small
    models (detectors plus observables at most 62 bits).
    """

    def __init__(self, dem: DetectorErrorModel, max_weight: int = 3):
        n_det, n_obs = dem.num_detectors, dem.num_observables
        if n_det + n_obs > 62:
            raise InstanceTooLargeError("exhaustive table needs at most 62 pattern bits")
        self.dem = dem
        n = len(dem)
        if sum(comb(n, w) for w in range(max_weight + 1)) > 5 * MAX_ENUMERATION:
            raise InstanceTooLargeError("too many subsets to tabulate")
        dm, om = dem.matrices()
        weights = np.int64(1) << np.arange(n_det, dtype=np.int64)
        dkey = dm.astype(np.int64) @ weights if n else np.zeros(0, np.int64)
        okey = om.astype(np.int64) @ (np.int64(1) << np.arange(n_obs, dtype=np.int64)) if n else np.zeros(0, np.int64)
        p = dem.probabilities
        score = np.log(p) - np.log1p(-p)
        keys_d = [np.zeros(1, np.int64)]
        keys_o = [np.zeros(1, np.int64)]
        scores = [np.zeros(1)]
        idx = np.arange(n)
        for w in range(1, max_weight + 1):
            if n < w:
                break
            sub = np.array(np.meshgrid(*([idx] * w), indexing="ij")).reshape(w, -1) if w > 1 else idx[None, :]
            ok = np.all(sub[1:] > sub[:-1], axis=0) if w > 1 else np.ones(sub.shape[1], bool)
            sub = sub[:, ok]
            kd = np.bitwise_xor.reduce(dkey[sub], axis=0)
            ko = np.bitwise_xor.reduce(okey[sub], axis=0)
            keys_d.append(kd)
            keys_o.append(ko)
            scores.append(score[sub].sum(axis=0))
        kd = np.concatenate(keys_d)
        ko = np.concatenate(keys_o)
        sc = np.concatenate(scores)
        order = np.lexsort((-sc, kd))
        kd, ko = kd[order], ko[order]
        first = np.ones(len(kd), bool)
        first[1:] = kd[1:] != kd[:-1]
        self.table = dict(zip(kd[first].tolist(), ko[first].tolist()))

    def decode(self, dets: np.ndarray):
        dets = np.atleast_2d(np.asarray(dets, dtype=bool))
        n_det, n_obs = self.dem.num_detectors, self.dem.num_observables
        keys = dets.astype(np.int64) @ (np.int64(1) << np.arange(n_det, dtype=np.int64))
        out = np.zeros((len(dets), n_obs), dtype=bool)
        found = np.zeros(len(dets), dtype=bool)
        for i, k in enumerate(keys.tolist()):
            o = self.table.get(k)
            if o is not None:
                found[i] = True
                out[i] = [(o >> j) & 1 for j in range(n_obs)]
        return out, found
