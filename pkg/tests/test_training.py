import math

import numpy as np
import pytest

from irn.autodiff import ops
from irn.autodiff.tensor import backward, recording
from irn.checkpoint import load_checkpoint, save_checkpoint
from irn.errors import ConfigError, DataError, NumericError
from irn.model import ModelConfig
from irn.skeleton.objects import make_samples
from irn.skeleton.synthetic import synthesize_corpus
from irn.training import (
    DESK_MODEL, DESK_TRAIN, TrainConfig, build_fused, evaluate, init_model, init_params, pretrain_and_fuse, read_history,
    swap_augment, train, truncated_normal, truncated_normal_std,
)
from irn.autodiff.optim import AdamState


def tiny_cfg(variant="inter", lstm=False, **kw):
    base = dict(variant=variant, use_h=True, lstm=lstm, n_classes=4, n_joints=15, T=4, d=3,
                g_widths=(12, 8), f_widths=(8, 6, 6), lstm_units=5)
    base.update(kw)
    return ModelConfig(**base)


@pytest.fixture(scope="module")
def corpus():
    return make_samples(synthesize_corpus(48, seed=1, n_frames=8), T=4, sequential=True)


def fast_train(**kw):
    base = dict(lr=3e-3, init_std=0.2, batch_size=8, epochs=3, seed=5, val_fraction=0.0, select_best=False)
    base.update(kw)
    return TrainConfig(**base)


# initialisation

def numeric_truncated_std(std, bound=2.0, n=200001):
    # trapezoid integration of the truncated density, independent of the closed form
    x = np.linspace(-bound * std, bound * std, n)
    pdf = np.exp(-0.5 * (x / std) ** 2)

    def trapezoid(y):
        return float(((y[1:] + y[:-1]) * np.diff(x)).sum() / 2)

    return math.sqrt(trapezoid(x * x * pdf) / trapezoid(pdf))


@pytest.mark.parametrize("std", [0.045, 0.09])
def test_truncated_normal_bounds_and_std(std):
    draws = truncated_normal(1_000_000, std, np.random.default_rng(0))
    assert np.abs(draws).max() <= 2 * std
    ref = numeric_truncated_std(std)
    assert abs(truncated_normal_std(std) - ref) <= 1e-9 * std
    assert abs(draws.std() / ref - 1.0) <= 0.05
    assert abs(ref / std - 0.8796) < 1e-4


def test_init_params_layout():
    cfg = tiny_cfg(lstm=True)
    a = init_params(cfg, 0.045, np.random.default_rng(3))
    b = init_params(cfg, 0.045, np.random.default_rng(3))
    assert all(np.array_equal(a[k].data, b[k].data) for k in a)
    for k, p in a.items():
        if k.endswith("bias"):
            assert not p.data.any()
        else:
            assert np.abs(p.data).max() <= 0.09 and p.data.std() > 0
    with pytest.raises(ConfigError):
        truncated_normal(3, 0.0, np.random.default_rng(0))


def test_train_config_validation():
    for bad in (dict(lr=-1.0), dict(init_std=0.0), dict(epochs=0), dict(val_fraction=1.0), dict(swap_prob=2.0)):
        with pytest.raises(ConfigError):
            TrainConfig(**bad)


# augmentation

def test_swap_augment(corpus):
    s = corpus[0]
    rng = np.random.default_rng(0)
    swapped = swap_augment(s, rng, prob=1.0)
    assert swapped.p1 is s.p2 and swapped.p2 is s.p1 and swapped.label == s.label
    assert all(a is d and b is c for (a, b), (c, d) in zip(swapped.windows, s.windows))
    assert swap_augment(s, rng, prob=0.0) is s
    n = sum(swap_augment(s, rng) is not s for _ in range(10_000))
    assert abs(n / 10_000 - 0.5) <= 0.01


def test_intra_swap_gradient_symmetry(corpus):
    m = init_model(tiny_cfg("intra"), 0.3, 0)
    s = corpus[2]
    params = list(m.params.values())

    def grads(samples, weights):
        with recording() as tape:
            total = None
            for smp, w in zip(samples, weights):
                loss = ops.scale(ops.softmax_cross_entropy(m.logits([smp]), [smp.label])[0], w)
                total = loss if total is None else ops.add(total, loss)
        backward(total, tape, params)
        return [p.grad.copy() for p in params]

    g_a = grads([s], [1.0])
    g_b = grads([s.swapped()], [1.0])
    g_sym = grads([s, s.swapped()], [0.5, 0.5])
    for a, b, c in zip(g_a, g_b, g_sym):
        assert np.max(np.abs(0.5 * (a + b) - c)) <= 1e-10
    assert any(not np.allclose(a, b) for a, b in zip(g_a, g_b))


# training loop

def test_loss_decreases_over_first_epochs():
    samples = make_samples(synthesize_corpus(200, seed=7), T=8)
    cfg = ModelConfig(variant="inter", use_h=True, n_classes=4, T=8, **DESK_MODEL)
    m = init_model(cfg, DESK_TRAIN["init_std"], 0)
    res = train(m, samples, TrainConfig(epochs=5, seed=0, val_fraction=0.0, **DESK_TRAIN))
    losses = [r["loss"] for r in res.history]
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_lr_zero_is_a_no_op(corpus):
    m = init_model(tiny_cfg(), 0.2, 0)
    before = {k: p.data.copy() for k, p in m.params.items()}
    train(m, corpus, fast_train(lr=0.0, epochs=1))
    assert all(np.array_equal(before[k], p.data) for k, p in m.params.items())


def test_memorises_one_sample(corpus):
    m = init_model(tiny_cfg(), 0.2, 0)
    res = train(m, corpus[3:4], fast_train(epochs=20, lr=1e-2, batch_size=1))
    assert evaluate(m, corpus[3:4]).accuracy == 1.0
    assert res.history[-1]["train_acc"] == 1.0


def test_empty_and_mismatched_sets(corpus):
    m = init_model(tiny_cfg(), 0.2, 0)
    with pytest.raises(DataError):
        train(m, [], fast_train())
    with pytest.raises(ConfigError):
        train(init_model(tiny_cfg(n_classes=2), 0.2, 0), corpus, fast_train())
    with pytest.raises(ConfigError):
        evaluate(init_model(tiny_cfg(n_classes=2), 0.2, 0), corpus)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nan_loss_aborts_with_context(corpus):
    m = init_model(tiny_cfg(), 0.2, 0)
    m.params["g_inter.layer0.weight"].data[0, 0] = np.nan
    with pytest.raises(NumericError, match="epoch 1"):
        train(m, corpus, fast_train(epochs=1))


def test_freeze_keeps_prefix_fixed(corpus):
    m = init_model(tiny_cfg(), 0.2, 0)
    g0 = m.params["g_inter.layer0.weight"].data.copy()
    f0 = m.params["f_inter.layer0.weight"].data.copy()
    train(m, corpus, fast_train(epochs=1, freeze=("g_inter",)))
    assert np.array_equal(m.params["g_inter.layer0.weight"].data, g0)
    assert not np.array_equal(m.params["f_inter.layer0.weight"].data, f0)
    assert all(p.requires_grad for p in m.params.values())


def test_select_best_restores_best_epoch(corpus, tmp_path):
    m = init_model(tiny_cfg(), 0.2, 0)
    res = train(m, corpus, fast_train(epochs=4, val_fraction=0.25, select_best=True), out_dir=tmp_path)
    assert len(res.val_ids) == 12
    best = max(res.history, key=lambda r: (r["val_acc"], -r["epoch"]))
    assert res.best_epoch == best["epoch"]
    ck = load_checkpoint(tmp_path / "best.npz")
    assert ck.epoch == res.best_epoch
    assert all(np.array_equal(ck.model.params[k].data, p.data) for k, p in m.params.items())


def test_runs_are_bit_identical(corpus, tmp_path):
    for run in ("a", "b"):
        m = init_model(tiny_cfg(lstm=True), 0.2, 0)
        train(m, corpus, fast_train(epochs=2), out_dir=tmp_path / run)
    for name in ("history.csv", "last.npz"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    hist = read_history(tmp_path / "a" / "history.csv")
    assert [r["epoch"] for r in hist] == [1, 2] and math.isnan(hist[0]["val_acc"])


def test_resume_matches_uninterrupted(corpus, tmp_path):
    cfg = fast_train(epochs=4, val_fraction=0.25, select_best=False)
    full = init_model(tiny_cfg(lstm=True), 0.2, 0)
    train(full, corpus, cfg, out_dir=tmp_path / "full")
    part = init_model(tiny_cfg(lstm=True), 0.2, 0)
    train(part, corpus, fast_train(epochs=2, val_fraction=0.25, select_best=False), out_dir=tmp_path / "part")
    again = init_model(tiny_cfg(lstm=True), 0.2, 99)  # resumed weights must override this init
    train(again, corpus, cfg, out_dir=tmp_path / "part", resume=True)
    drift = max(np.max(np.abs(full.params[k].data - again.params[k].data)) for k in full.params)
    assert drift <= 1e-15
    assert (tmp_path / "full" / "history.csv").read_bytes() == (tmp_path / "part" / "history.csv").read_bytes()


def test_resume_rejects_other_config(corpus, tmp_path):
    m = init_model(tiny_cfg(), 0.2, 0)
    train(m, corpus, fast_train(epochs=1), out_dir=tmp_path)
    with pytest.raises(ConfigError, match="fingerprint"):
        train(init_model(tiny_cfg(), 0.2, 0), corpus, fast_train(epochs=2, lr=1e-2), out_dir=tmp_path, resume=True)


def test_checkpoint_round_trip(tmp_path):
    m = init_model(tiny_cfg("fc1_fused", lstm=True), 0.2, 4)
    adam = AdamState(lr=1e-3, t=7, m={"g_inter.layer0.bias": np.arange(8.0)}, v={"g_inter.layer0.bias": np.ones(8)})
    rng = np.random.default_rng(11)
    rng.random(3)
    path = save_checkpoint(tmp_path / "c.npz", m, "abc", 3, adam, rng, [{"epoch": 1}], {"k": 1})
    ck = load_checkpoint(path, expect_fingerprint="abc")
    assert ck.model.config == m.config and ck.epoch == 3 and ck.extra == {"k": 1}
    assert all(np.array_equal(ck.model.params[k].data, p.data) for k, p in m.params.items())
    assert ck.adam.t == 7 and np.array_equal(ck.adam.m["g_inter.layer0.bias"], np.arange(8.0))
    restored = np.random.default_rng(0)
    restored.bit_generator.state = ck.rng_state
    assert restored.random() == rng.random()
    with pytest.raises(ConfigError):
        load_checkpoint(path, expect_fingerprint="other")
    with pytest.raises(ConfigError):
        load_checkpoint(tmp_path / "missing.npz")
    (tmp_path / "junk.npz").write_bytes(b"not a zip")
    with pytest.raises(DataError):
        load_checkpoint(tmp_path / "junk.npz")


# evaluation

def test_evaluate_tie_break_and_determinism(corpus):
    m = init_model(tiny_cfg(), 0.2, 0)
    for k, p in m.params.items():
        if k.startswith("f_inter.classifier"):
            p.data[...] = 0.0
    res = evaluate(m, corpus)
    assert (res.preds == 0).all()
    assert res.accuracy == pytest.approx(0.25)
    m2 = init_model(tiny_cfg(), 0.2, 0)
    a, b = evaluate(m2, corpus), evaluate(m2, corpus)
    assert np.array_equal(a.probs, b.probs) and a.accuracy == b.accuracy


# fusion

@pytest.mark.parametrize("variant", ["fused", "fc1_fused"])
def test_build_fused_copies_pretrained(variant, corpus):
    inter = init_model(tiny_cfg("inter"), 0.2, 1)
    intra = init_model(tiny_cfg("intra"), 0.2, 2)
    fused = build_fused(tiny_cfg(variant), inter, intra, 0.2, np.random.default_rng(0))
    pairs = [(s.p1, s.p2) for s in corpus[:10]]
    a = fused.pooled(pairs)
    assert np.max(np.abs(a["inter"].data - inter.pooled(pairs)["inter"].data)) <= 1e-12
    assert np.max(np.abs(a["intra"].data - intra.pooled(pairs)["intra"].data)) <= 1e-12
    if variant == "fc1_fused":
        trace = {}
        fused.window_logits(pairs, trace=trace)
        want = ops.relu(ops.linear(inter.pooled(pairs)["inter"], inter.params["f_inter.layer0.weight"],
                                   inter.params["f_inter.layer0.bias"])).data
        assert np.max(np.abs(trace["fc_inter"].data - want)) <= 1e-12
    rand = build_fused(tiny_cfg(variant), inter, intra, 0.2, np.random.default_rng(0), random_init=True)
    for src in (inter, intra):
        for k, p in src.params.items():
            if k.endswith("weight") and k in rand.params and p.shape == rand.params[k].shape:
                assert not np.array_equal(rand.params[k].data, p.data)
    with pytest.raises(ConfigError):
        build_fused(tiny_cfg(variant), None, intra, 0.2, np.random.default_rng(0))
    with pytest.raises(ConfigError):
        build_fused(tiny_cfg(variant), intra, inter, 0.2, np.random.default_rng(0))


def test_pretrain_and_fuse_stages(corpus, tmp_path):
    res = pretrain_and_fuse(corpus, tiny_cfg("fc1_fused"), fast_train(epochs=2), out_dir=tmp_path)
    assert set(res.histories) == {"inter", "intra", "fused"}
    assert (tmp_path / "inter" / "last.npz").exists() and (tmp_path / "fused" / "history.csv").exists()
    assert res.model.config.variant == "fc1_fused"
    rand = pretrain_and_fuse(corpus, tiny_cfg("fused"), fast_train(epochs=1), random_init=True)
    assert set(rand.histories) == {"fused"} and rand.inter is None
