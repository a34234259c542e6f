from pathlib import Path

import numpy as np
import pytest

from mccd import bench, model
from mccd.bench import BenchReport, BenchRow, CSV_HEADER, evaluate_accuracy, linear_fit
from mccd.dataset import generate
from mccd.noise import NoiseModel

GOLDEN = Path(__file__).parent / "golden"


def fixed_report():
    return BenchReport([
        BenchRow("mccd", 3, "I", 2, 10000, 0.9864, 2.5e-05),
        BenchRow("mccd", 3, "I", 4, 10000, 0.9638, 3.75e-05),
        BenchRow("mle", 3, "II", 4, 500, 0.95, 0.0123),
    ])


def test_csv_golden():
    text = fixed_report().to_csv()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    assert text == (GOLDEN / "report.csv").read_text()
    back = BenchReport.from_csv(text)
    assert back.to_csv() == text


def test_stderr_formula():
    r = BenchRow("mccd", 3, "I", 2, 400, 0.9, 1e-3)
    assert r.stderr == pytest.approx(np.sqrt(0.9 * 0.1 / 400))


def test_linear_fit():
    x = np.arange(4, 37, 4)
    s, i, r2 = linear_fit(x, 2.0 * x + 1.0)
    assert (s, i, r2) == (pytest.approx(2.0), pytest.approx(1.0), pytest.approx(1.0))


def test_zero_noise_accuracy_is_one():
    rep = evaluate_accuracy("majority", 3, "II", [4], 200, seed=1, noise=NoiseModel.noiseless())
    assert rep.rows[0].accuracy == 1.0
    p = model.zero_params(3, 8)
    rep = evaluate_accuracy(p, 3, "I", [2], 200, seed=1, noise=NoiseModel.noiseless())
    assert rep.rows[0].accuracy == 1.0


def test_zero_model_equals_majority():
    p = model.zero_params(3, 8)
    rep = evaluate_accuracy(p, 3, "I", [4], 2000, seed=2)
    b = generate(3, "I", 1, 4, 2000, seed=2, stream=4)
    assert rep.rows[0].accuracy == pytest.approx(float(np.mean(b.labels == 0)))
    assert rep.rows[0].accuracy == pytest.approx(bench.majority_accuracy(b.labels))


def test_reproducible_accuracy():
    p = model.init_params(3, 8, seed=1)
    a = evaluate_accuracy(p, 3, "II", [4], 300, seed=5)
    b = evaluate_accuracy(p, 3, "II", [4], 300, seed=5)
    assert a.rows[0].accuracy == b.rows[0].accuracy


def test_checkpoint_distance_mismatch():
    with pytest.raises(ValueError):
        evaluate_accuracy(model.init_params(5, 4), 3, "I", [2], 10, seed=0)


def test_walltime_single_depth_has_no_fit():
    p = model.init_params(3, 8)
    rep = bench.benchmark_walltime(p, 3, "I", [4], 20)
    assert rep.r2 is None and rep.rows[0].mean_walltime_s > 0
    assert "linear fit" not in rep.to_table()


def test_mle_accuracy_runs():
    rep = evaluate_accuracy("mle", 3, "I", [2], 64, seed=3)
    assert 0.9 < rep.rows[0].accuracy <= 1.0
