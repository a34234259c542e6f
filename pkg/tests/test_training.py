import numpy as np
import pytest

from mccd import model, training
from mccd.dataset import generate
from mccd.model import Inputs, init_params
from mccd.training import AdamState, ConfigError, TrainConfig, adam_step, loss

LN2 = np.log(2.0)


def test_loss_examples():
    assert loss([[0.0, 0.0]], [[0.0, 0.0]], [1]) == pytest.approx(1.5 * LN2)
    assert loss([[0.0, 0.0]], [[0.0, 0.0]], [0]) == pytest.approx(1.03972, abs=1e-5)
    assert loss([[20.0, -20.0]], [[0.0, 0.0]], [0]) == pytest.approx(0.5 * LN2, abs=1e-12)
    main = np.array([[1.0, -2.0], [0.3, 0.1]])
    aux = np.array([[5.0, 1.0], [-1.0, 2.0]])
    lab = np.array([1, 0])
    ce = training.cross_entropy(main, lab)
    assert loss(main, aux, lab, aux_weight=0.0) == pytest.approx(ce.mean())


def test_loss_at_zero_model():
    p = model.zero_params(3, 6)
    inp = training.audit_inputs()
    value, _ = training.loss_and_grads(p, inp, aux_weight=0.5)
    assert value == pytest.approx(1.5 * LN2)


def test_no_path_means_zero_gradient():
    p = init_params(3, 8, seed=1)
    for name in ("main.w1", "main.b1", "main.w2"):
        p.tensors[name][:] = 0.0
    grads = training.backward(p, training.audit_inputs(), aux_weight=0.0)
    for name, g in grads.items():
        if name.split(".")[0] in model.MODULES:
            assert not g.any(), name


def test_duplicate_samples_keep_mean_gradient():
    p = init_params(3, 8, seed=2)
    inp = training.audit_inputs()
    one = Inputs(*(a[:1] for a in (inp.syndromes, inp.final, inp.labels, inp.tags, inp.partners)))
    two = Inputs(*(np.concatenate([a[:1], a[:1]]) for a in (inp.syndromes, inp.final, inp.labels, inp.tags, inp.partners)))
    g1 = training.backward(p, one)
    g2 = training.backward(p, two)
    for name in g1:
        assert np.allclose(g1[name], g2[name], atol=1e-14)


def test_grad_check_sensitivity():
    p = init_params(3, 4, seed=3, scale=2.0)
    inp = training.audit_inputs()
    names = ["H.l1.w_x", "main.w2"]
    small, _ = training.grad_check(p, inp, eps=1e-5, names=names, max_per_tensor=8)
    big, _ = training.grad_check(p, inp, eps=1e-1, names=names, max_per_tensor=8)
    assert small < 1e-5 < big


def test_grad_check_exact_zero_without_path():
    p = init_params(3, 4, seed=4)
    one_qubit = generate(3, "I", 1, 2, 4, seed=1)
    inp = Inputs.from_batches([one_qubit])
    _, per = training.grad_check(p, inp, names=["CNOT.l1.w_x"], max_per_tensor=5)
    assert per["CNOT.l1.w_x"] == 0.0


def test_adam_first_step():
    p = model.zero_params(3, 2)
    names = ["main.b2", "aux.b2"]
    st = AdamState.zeros(p, names)
    grads = {n: np.zeros_like(v) for n, v in p.tensors.items()}
    grads["main.b2"][:] = [3e-4, -2.0]
    grads["aux.b2"][:] = [3e-1, -2000.0]
    adam_step(p, grads, st, 1e-3)
    assert np.allclose(p["main.b2"], [-1e-3, 1e-3], rtol=1e-4)
    assert np.allclose(p["main.b2"], p["aux.b2"], rtol=1e-4)
    assert st.step == 1


def test_adam_zero_grads():
    p = init_params(3, 2, seed=1)
    before = p.copy()
    st = AdamState.zeros(p)
    zero = {n: np.zeros_like(v) for n, v in p.tensors.items()}
    for _ in range(5):
        adam_step(p, zero, st, 1e-2)
    assert p.equals(before)


@pytest.mark.parametrize("kw", [
    dict(learning_rate=0.0),
    dict(aux_weight=-1.0),
    dict(stage=3),
    dict(stage=1, circuit_type="II"),
    dict(stage=2, circuit_type="II"),
    dict(stage=2, circuit_type="I", checkpoint_in="x"),
])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        TrainConfig(**kw)


def test_stage_entry_guards(tmp_path):
    cfg1 = TrainConfig(num_batches=1, batch_size=4, hidden=4)
    with pytest.raises(ConfigError):
        training.train_stage2(cfg1)
    ckpt = tmp_path / "d5.ckpt"
    model.save_checkpoint(ckpt, init_params(5, 4))
    cfg2 = TrainConfig(stage=2, circuit_type="II", num_logical_qubits=2, depths=(4,), checkpoint_in=str(ckpt),
                       num_batches=1, batch_size=4)
    with pytest.raises(ConfigError):
        training.train_stage2(cfg2)


def test_reproducible_checkpoint(tmp_path):
    def run(name):
        cfg = TrainConfig(depths=(2, 4), batch_size=32, num_batches=4, hidden=8, seed=5,
                          checkpoint_out=str(tmp_path / name), log_path=str(tmp_path / (name + ".csv")))
        training.train_stage1(cfg)
        return (tmp_path / name).read_bytes()

    assert run("a.ckpt") == run("b.ckpt")
    log = (tmp_path / "a.ckpt.csv").read_text().splitlines()
    assert log[0] == "step,loss_main,loss_aux,loss_total" and len(log) == 5


def test_stage1_smoke_learns():
    cfg = TrainConfig(depths=(2, 4), batch_size=256, num_batches=200, hidden=32, seed=1, learning_rate=3e-3)
    res = training.train_stage1(cfg)
    first = np.mean([r[3] for r in res.losses[:10]])
    last = np.mean([r[3] for r in res.losses[-10:]])
    assert last < first
    assert not any(np.any(res.params[n] != init_params(3, 32, seed=1)[n]) for n in model.ModelParams.module_names("CNOT"))


def test_stage2_smoke_freezes(tmp_path):
    cfg1 = TrainConfig(depths=(2, 4), batch_size=128, num_batches=150, hidden=16, seed=2, learning_rate=3e-3,
                       checkpoint_out=str(tmp_path / "s1.ckpt"))
    s1 = training.train_stage1(cfg1).params
    cfg = TrainConfig(stage=2, circuit_type="II", num_logical_qubits=2, depths=(4, 8), batch_size=64,
                      num_batches=120, seed=3, checkpoint_in=str(tmp_path / "s1.ckpt"), learning_rate=3e-3)
    res = training.train_stage2(cfg)
    frozen = [n for n in model.param_names() if not n.startswith("CNOT.")]
    assert res.params.equals(s1, frozen)
    assert not res.params.equals(s1, model.ModelParams.module_names("CNOT"))
    assert np.mean([r[3] for r in res.losses[-20:]]) < np.mean([r[3] for r in res.losses[:20]])


def test_mask_grads():
    g = {"a": np.ones(2), "b": np.ones(3)}
    m = training.mask_grads(g, ["b"])
    assert not m["a"].any() and m["b"].all()
    assert set(training.trainable_names(2)) == set(model.ModelParams.module_names("CNOT"))
    assert not set(training.trainable_names(1)) & set(training.trainable_names(2))
