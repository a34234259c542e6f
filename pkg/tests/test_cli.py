import numpy as np
import pytest
import yaml

from mccd import cli, config, model
from mccd.dataset import read_dataset
from mccd.training import ConfigError


def write_cfg(path, **kw):
    base = dict(distance=3, circuit_type="I", num_logical_qubits=1, depths=[2, 4], batch_size=16,
                learning_rate=0.003, aux_weight=0.5, num_batches=3, stage=1, seed=4,
                checkpoint_in=None, checkpoint_out=str(path.parent / "m.ckpt"), hidden=8)
    base.update(kw)
    path.write_text(yaml.safe_dump(base))
    return path


def test_config_keys(tmp_path):
    data = config.load_config(write_cfg(tmp_path / "c.yaml"))
    cfg = config.train_config(data)
    assert cfg.depths == (2, 4) and cfg.hidden == 8 and cfg.stage == 1
    dumped = yaml.safe_load(config.dump_config(cfg))
    assert list(dumped) == list(config.KEYS)


def test_config_rejects_unknown(tmp_path):
    (tmp_path / "c.yaml").write_text("distance: 3\nlr: 1\n")
    with pytest.raises(ConfigError):
        config.load_config(tmp_path / "c.yaml")


def test_train_then_eval(tmp_path, capsys):
    cfg = write_cfg(tmp_path / "c.yaml")
    assert cli.main(["train", "--config", str(cfg), "--log", str(tmp_path / "loss.csv")]) == 0
    p = model.load_checkpoint(tmp_path / "m.ckpt")
    assert p.hidden == 8
    assert (tmp_path / "loss.csv").read_text().startswith("step,loss_main,loss_aux,loss_total")
    out = tmp_path / "r.csv"
    assert cli.main(["eval", "--config", str(cfg), "--shots", "50", "--out", str(out)]) == 0
    assert out.read_text().startswith("decoder,d,type,depth,shots,accuracy,stderr,mean_walltime_s")
    assert cli.main(["bench", "--checkpoint", str(tmp_path / "m.ckpt"), "--depths", "4,8", "--shots", "5"]) == 0
    assert "linear fit" in capsys.readouterr().out


def test_gen_dem_mle(tmp_path, capsys):
    data = tmp_path / "x.dat"
    assert cli.main(["gen", "--d", "3", "--type", "II", "--depth", "4", "--count", "40", "--seed", "2",
                     "--out", str(data)]) == 0
    b = read_dataset(data)
    assert len(b) == 40 and b.num_qubits == 2
    assert cli.main(["mle", str(data)]) == 0
    assert "MLE (max weight 2) accuracy" in capsys.readouterr().out
    circ = tmp_path / "c.txt"
    circ.write_text("Q=1 D=2 TYPE=I\nH@0\nH@0\n")
    assert cli.main(["dem", "--circuit", str(circ), "--out", str(tmp_path / "d.txt")]) == 0
    from pathlib import Path
    assert (tmp_path / "d.txt").read_text() == (Path(__file__).parent / "golden" / "dem_d3_type1_hh.txt").read_text()


def test_gradcheck_command(capsys):
    assert cli.main(["gradcheck", "--hidden", "3"]) == 0
    assert "max relative error" in capsys.readouterr().out


def test_stage2_needs_checkpoint(tmp_path):
    cfg = write_cfg(tmp_path / "c.yaml", stage=2, circuit_type="II", num_logical_qubits=2, depths=[4])
    with pytest.raises(ConfigError):
        cli.main(["train", "--config", str(cfg)])
