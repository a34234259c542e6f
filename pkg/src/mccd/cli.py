"""Command-line entry point: ``mccd <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import bench, config, dataset, dem, model, training
from .compiler import build_detector_map, compile_circuit
from .geometry import build_layout
from .logical import LogicalCircuit, sample_mirror
from .frame import shot_rng

log = logging.getLogger("mccd")


def _depths(text: str) -> list[int]:
    return [int(x) for x in text.replace(",", " ").split()]


def _settings(args) -> dict:
    data = config.load_config(args.config) if getattr(args, "config", None) else {}
    if args.seed is not None:
        data["seed"] = args.seed
    return data


def _pick(args, data, name, key=None, default=None):
    v = getattr(args, name, None)
    if v is not None:
        return v
    return data.get(key or name, default)


def _write(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_gen(args) -> int:
    data = _settings(args)
    d = _pick(args, data, "d", "distance", 3)
    ctype = _pick(args, data, "type", "circuit_type", "I")
    q = _pick(args, data, "qubits", "num_logical_qubits", 1 if ctype == "I" else 2)
    depth = args.depth or (data.get("depths") or [2])[0]
    batch = dataset.generate(d, ctype, q, depth, args.count, seed=data.get("seed", 0))
    dataset.write_dataset(args.out, batch)
    print(f"wrote {len(batch)} trajectories (d={d}, type {ctype}, Q={q}, D={depth}) to {args.out}")
    print(f"label rate {batch.labels.mean():.4f}")
    return 0


def cmd_train(args) -> int:
    data = _settings(args)
    cfg = config.train_config(data, checkpoint_out=args.out, log_path=args.log)
    if cfg.checkpoint_out is None:
        raise SystemExit("train needs checkpoint_out in the config or --out")
    if cfg.stage == 1:
        result = training.train_stage1(cfg)
    else:
        result = training.train_stage2(cfg)
    first, last = result.losses[0][3], result.losses[-1][3]
    print(f"stage {cfg.stage}: {cfg.num_batches} batches in {result.seconds:.1f}s, loss {first:.5f} -> {last:.5f}")
    print(f"checkpoint written to {cfg.checkpoint_out}")
    return 0


def _emit_report(report: bench.BenchReport, out) -> None:
    print(report.to_table())
    if out:
        Path(out).write_text(report.to_csv())


def cmd_eval(args) -> int:
    data = _settings(args)
    d = _pick(args, data, "d", "distance", 3)
    ctype = _pick(args, data, "type", "circuit_type", "I")
    depths = _depths(args.depths) if args.depths else list(data.get("depths", [2]))
    shots = args.shots or data.get("shots", 10_000)
    if args.decoder == "mccd":
        ckpt = args.checkpoint or data.get("checkpoint_out") or data.get("checkpoint_in")
        if not ckpt:
            raise SystemExit("eval with the mccd decoder needs --checkpoint")
        decoder = model.load_checkpoint(ckpt)
    else:
        decoder = args.decoder
    report = bench.evaluate_accuracy(decoder, d, ctype, depths, shots, seed=data.get("seed", 0),
                                     num_qubits=data.get("num_logical_qubits"),
                                     max_weight=data.get("max_weight", 2))
    _emit_report(report, args.out)
    return 0


def cmd_bench(args) -> int:
    data = _settings(args)
    ckpt = args.checkpoint or data.get("checkpoint_out") or data.get("checkpoint_in")
    if not ckpt:
        raise SystemExit("bench needs --checkpoint")
    params = model.load_checkpoint(ckpt)
    ctype = _pick(args, data, "type", "circuit_type", "I")
    depths = _depths(args.depths) if args.depths else list(range(4, 37, 4))
    report = bench.benchmark_walltime(params, params.d, ctype, depths, args.shots, seed=data.get("seed", 0),
                                      num_qubits=data.get("num_logical_qubits"))
    _emit_report(report, args.out)
    return 0


def _circuit_from_args(args, data) -> LogicalCircuit:
    if args.circuit:
        return LogicalCircuit.from_text(Path(args.circuit).read_text())
    ctype = _pick(args, data, "type", "circuit_type", "I")
    q = _pick(args, data, "qubits", "num_logical_qubits", 1 if ctype == "I" else 2)
    depth = args.depth or (data.get("depths") or [2])[0]
    return sample_mirror(ctype, q, depth, shot_rng(data.get("seed", 0), 0))


def cmd_dem(args) -> int:
    data = _settings(args)
    d = _pick(args, data, "d", "distance", 3)
    circuit = _circuit_from_args(args, data)
    layout = build_layout(d)
    pc = compile_circuit(circuit, layout, dataset.NoiseModel())
    model_ = dem.extract_dem(pc, build_detector_map(circuit, layout, pc))
    _write(model_.to_text(), args.out)
    if args.out:
        print(f"{len(model_)} faults, {model_.num_detectors} detectors written to {args.out}")
    return 0


def cmd_mle(args) -> int:
    batch = dataset.read_dataset(args.dataset)
    layout = build_layout(batch.d)
    ctype = args.type or ("II" if np.any(batch.tags >= dataset.TAG_CODES["CNOT_C"]) else "I")
    decoders: dict[str, dem.MLEDecoder] = {}
    correct = 0
    missing = 0
    lines = []
    for i, traj in enumerate(batch):
        circuit = dataset.circuit_from_tags(traj.tags, traj.partners, ctype)
        key = circuit.to_text()
        if key not in decoders:
            _, pc, dmap = dataset.compiled(circuit, batch.d, dataset.NoiseModel())
            decoders[key] = (dem.MLEDecoder(dem.extract_dem(pc, dmap), args.max_weight), dmap)
        decoder, dmap = decoders[key]
        dets = np.concatenate([traj.syndromes.reshape(-1), traj.final.reshape(-1)]).astype(bool)
        pred, found = decoder.decode(dets[None, :])
        correct += int(np.sum(pred[0] == traj.labels))
        missing += int(not found[0])
        lines.append(",".join(map(str, pred[0].astype(int))))
    total = batch.labels.size
    print(f"MLE (max weight {args.max_weight}) accuracy {correct / total:.5f} over {total} logical outcomes; "
          f"{missing} trajectories without a matching fault set")
    if args.out:
        Path(args.out).write_text("\n".join(lines) + "\n")
    return 0


def cmd_gradcheck(args) -> int:
    seed = args.seed or 0
    params = model.init_params(3, args.hidden, seed=seed, scale=2.0)
    err, per = training.grad_check(params, training.audit_inputs(3, seed), eps=args.eps)
    worst = max(per, key=per.get)
    print(f"max relative error {err:.3e} (worst tensor {worst})")
    return 0 if err < 1e-5 else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mccd", description="Noisy logical circuit simulation and decoding.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        return p

    p = common(sub.add_parser("gen", help="sample mirror circuits and write a dataset file"))
    p.add_argument("--d", type=int)
    p.add_argument("--type", choices=("I", "II"))
    p.add_argument("--qubits", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--count", type=int, default=1000)
    p.set_defaults(func=cmd_gen)

    p = common(sub.add_parser("train", help="run stage 1 or stage 2 training"))
    p.add_argument("--log", help="CSV loss log path")
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("eval", help="logical accuracy versus depth"))
    p.add_argument("--decoder", choices=("mccd", "mle", "majority"), default="mccd")
    p.add_argument("--checkpoint")
    p.add_argument("--d", type=int)
    p.add_argument("--type", choices=("I", "II"))
    p.add_argument("--depths")
    p.add_argument("--shots", type=int)
    p.set_defaults(func=cmd_eval)

    p = common(sub.add_parser("bench", help="decode wall time versus depth"))
    p.add_argument("--checkpoint")
    p.add_argument("--type", choices=("I", "II"))
    p.add_argument("--depths")
    p.add_argument("--shots", type=int, default=200)
    p.set_defaults(func=cmd_bench)

    p = common(sub.add_parser("dem", help="dump the detector error model of a circuit"))
    p.add_argument("--d", type=int)
    p.add_argument("--type", choices=("I", "II"))
    p.add_argument("--qubits", type=int)
    p.add_argument("--depth", type=int)
    p.add_argument("--circuit", help="logical circuit text file")
    p.set_defaults(func=cmd_dem)

    p = common(sub.add_parser("mle", help="decode a dataset file with the MLE baseline"))
    p.add_argument("dataset")
    p.add_argument("--type", choices=("I", "II"))
    p.add_argument("--max-weight", type=int, default=2)
    p.set_defaults(func=cmd_mle)

    p = common(sub.add_parser("gradcheck", help="finite-difference gradient audit"))
    p.add_argument("--hidden", type=int, default=8)
    p.add_argument("--eps", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
