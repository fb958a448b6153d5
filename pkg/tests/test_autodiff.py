import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irn.autodiff import (
    Adam, AdamState, LstmParams, Tensor, adam_step, backward, concat, dropout, grad_check,
    linear, lstm_cell, lstm_forward, mean_pool_rows, recording, relu, sigmoid,
    softmax_cross_entropy, sum_all, tanh,
)
from irn.autodiff import ops
from irn.errors import ConfigError, DataError, DimensionError, NumericError

from conftest import max_rel, numeric_grad, tape_grads


def test_linear_identity_and_bias():
    y = linear(Tensor([[1.0, 2.0]]), Tensor(np.eye(2)), Tensor([0.0, 0.0]))
    assert y.data.tolist() == [[1.0, 2.0]]
    y = linear(Tensor([[1.0, 1.0]]), Tensor(np.zeros((2, 2))), Tensor([3.0, 4.0]))
    assert y.data.tolist() == [[3.0, 4.0]]


def test_linear_shape_error_names_both_shapes():
    with pytest.raises(DimensionError, match=r"\(1, 3\).*\(2, 2\)"):
        linear(Tensor(np.ones((1, 3))), Tensor(np.ones((2, 2))), Tensor(np.zeros(2)))


def test_linear_grad_vs_finite_differences(rng):
    x = Tensor(rng.normal(size=(4, 3)), True)
    W = Tensor(rng.normal(size=(3, 5)), True)
    b = Tensor(rng.normal(size=5), True)
    fn = lambda: sum_all(linear(x, W, b))
    gx, gW, gb = tape_grads(fn, [x, W, b])
    for t, g in [(x, gx), (W, gW), (b, gb)]:
        num = numeric_grad(lambda: fn().item(), t.data)
        assert max_rel(g, num) <= 1e-6


def test_activations_values():
    assert relu(Tensor([-1.0, 0.0, 2.0])).data.tolist() == [0.0, 0.0, 2.0]
    assert sigmoid(Tensor([0.0])).data.tolist() == [0.5]
    # no overflow at extreme inputs
    s = sigmoid(Tensor([-1000.0, 1000.0])).data
    assert s[0] == 0.0 and s[1] == 1.0


def test_relu_subgradient_at_zero_is_zero():
    x = Tensor([0.0, 1.0], True)
    (g,) = tape_grads(lambda: sum_all(relu(x)), [x])
    assert g.tolist() == [0.0, 1.0]


@pytest.mark.parametrize("fn", [tanh, sigmoid])
def test_smooth_activation_grads(fn, rng):
    x = Tensor(rng.normal(size=10), True)
    w = rng.normal(size=10)
    loss = lambda: sum_all(ops.mul(fn(x), Tensor(w)))
    (g,) = tape_grads(loss, [x])
    assert max_rel(g, numeric_grad(lambda: loss().item(), x.data)) <= 1e-6


def test_concat_values_and_identity():
    assert concat([Tensor([[1.0]]), Tensor([[2.0]])]).data.tolist() == [[1.0, 2.0]]
    t = Tensor([[1.0, 2.0]])
    assert concat([t]) is t
    with pytest.raises(DimensionError):
        concat([Tensor(np.ones((1, 2))), Tensor(np.ones((2, 2)))])


def test_concat_gradient_routing_one_hot(rng):
    a = Tensor(rng.normal(size=(2, 2)), True)
    b = Tensor(rng.normal(size=(2, 3)), True)
    for j in range(5):
        probe = np.zeros((2, 5))
        probe[1, j] = 1.0
        ga, gb = tape_grads(lambda: sum_all(ops.mul(concat([a, b]), Tensor(probe))), [a, b])
        expect_a = probe[:, :2]
        expect_b = probe[:, 2:]
        assert np.array_equal(ga, expect_a) and np.array_equal(gb, expect_b)


def test_mean_pool_rows():
    assert mean_pool_rows(Tensor([[2.0, 4.0], [4.0, 8.0]])).data.tolist() == [3.0, 6.0]
    assert mean_pool_rows(Tensor([[1.5, -2.0]])).data.tolist() == [1.5, -2.0]
    r = np.array([0.1, 0.7, 1e-3])
    assert np.array_equal(mean_pool_rows(Tensor(np.tile(r, (7, 1)))).data, np.tile(r, (7, 1)).mean(0))
    with pytest.raises(DataError):
        mean_pool_rows(Tensor(np.zeros((0, 3))))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(1, 6), st.integers(0, 2**32 - 1))
def test_mean_pool_permutation_invariant(P, D, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(P, D))
    perm = rng.permutation(P)
    a = mean_pool_rows(Tensor(x)).data
    b = mean_pool_rows(Tensor(x[perm])).data
    assert np.max(np.abs(a - b)) <= 1e-12


def test_mean_pool_gradient_is_uniform():
    x = Tensor(np.ones((4, 2)), True)
    (g,) = tape_grads(lambda: sum_all(mean_pool_rows(x)), [x])
    assert np.array_equal(g, np.full((4, 2), 0.25))


def test_dropout_modes(rng):
    x = Tensor(rng.normal(size=(3, 4)))
    assert np.array_equal(dropout(x, 0.9, training=False).data, x.data)
    assert np.array_equal(dropout(x, 0.0, training=True, rng=rng).data, x.data)
    with pytest.raises(ConfigError):
        dropout(x, 1.0, training=True, rng=rng)
    with pytest.raises(ConfigError):
        dropout(x, -0.1, training=False)


def test_dropout_preserves_mean_law_of_large_numbers(rng):
    out = dropout(Tensor(np.ones(1_000_000)), 0.25, training=True, rng=rng).data
    assert abs(out.mean() - 1.0) <= 0.01
    assert set(np.unique(out)).issubset({0.0, 1.0 / 0.75})


def test_softmax_cross_entropy_symmetry_and_saturation():
    loss, probs = softmax_cross_entropy(Tensor(np.zeros((1, 4))), [2])
    assert np.allclose(probs, 0.25) and math.isclose(loss.item(), math.log(4), rel_tol=1e-12)
    logits = np.zeros((1, 3))
    logits[0, 1] = 1000.0
    loss, probs = softmax_cross_entropy(Tensor(logits), [1])
    assert loss.item() < 1e-12 and np.isfinite(probs).all()
    with pytest.raises(DataError):
        softmax_cross_entropy(Tensor(np.zeros((1, 3))), [3])


def test_softmax_cross_entropy_gradient(rng):
    z = Tensor(rng.normal(size=(5, 4)), True)
    labels = [0, 3, 1, 1, 2]
    fn = lambda: softmax_cross_entropy(z, labels)[0]
    (g,) = tape_grads(fn, [z])
    assert max_rel(g, numeric_grad(lambda: fn().item(), z.data)) <= 1e-6
    _, probs = softmax_cross_entropy(z, labels)
    assert np.allclose(probs.sum(1), 1.0, atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cross_entropy_non_negative(seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(scale=10, size=(3, 5))
    loss, probs = softmax_cross_entropy(Tensor(z), rng.integers(0, 5, size=3))
    assert loss.item() >= 0
    assert np.all(np.abs(probs.sum(1) - 1) <= 1e-6)


def _random_lstm(rng, D, H, scale=0.5):
    return LstmParams(
        Tensor(rng.normal(scale=scale, size=(D, 4 * H)), True),
        Tensor(rng.normal(scale=scale, size=(H, 4 * H)), True),
        Tensor(rng.normal(scale=scale, size=4 * H), True),
    )


def test_lstm_zero_weights_give_zero_hidden(rng):
    p = LstmParams.zeros(3, 4)
    h = lstm_forward([Tensor(rng.normal(size=3)) for _ in range(5)], p)
    assert h.shape == (4,) and np.array_equal(h.data, np.zeros(4))
    with pytest.raises(DataError):
        lstm_forward([], p)


def test_lstm_single_step_is_one_cell(rng):
    p = _random_lstm(rng, 3, 2)
    x = rng.normal(size=3)
    h = lstm_forward([Tensor(x)], p).data
    h1, _ = lstm_cell(Tensor(x[None]), Tensor(np.zeros((1, 2))), Tensor(np.zeros((1, 2))), p)
    # hand-rolled cell
    pre = x @ p.w_x.data + p.bias.data
    sig = lambda v: 1 / (1 + np.exp(-v))
    i, f, g, o = sig(pre[0:2]), sig(pre[2:4]), np.tanh(pre[4:6]), sig(pre[6:8])
    expect = o * np.tanh(i * g)
    assert np.allclose(h, expect, atol=1e-15) and np.allclose(h1.data[0], expect, atol=1e-15)


def test_lstm_bptt_gradients(rng):
    p = _random_lstm(rng, 3, 2)
    xs = [Tensor(rng.normal(size=(2, 3)), True) for _ in range(3)]
    w = rng.normal(size=(2, 2))
    fn = lambda: sum_all(ops.mul(lstm_forward(xs, p), Tensor(w)))
    tensors = [p.w_x, p.w_h, p.bias] + xs
    grads = tape_grads(fn, tensors)
    for t, g in zip(tensors, grads):
        assert max_rel(g, numeric_grad(lambda: fn().item(), t.data)) <= 1e-5


def test_lstm_masking_freezes_finished_rows(rng):
    p = _random_lstm(rng, 3, 2)
    seq_a = [rng.normal(size=3) for _ in range(3)]
    seq_b = [rng.normal(size=3) for _ in range(1)]
    steps = [np.stack([seq_a[t], seq_b[min(t, 0)]]) for t in range(3)]
    masks = [np.array([1, 1]), np.array([1, 0]), np.array([1, 0])]
    h = lstm_forward([Tensor(s) for s in steps], p, masks=masks).data
    ha = lstm_forward([Tensor(s) for s in seq_a], p).data
    hb = lstm_forward([Tensor(s) for s in seq_b], p).data
    assert np.allclose(h[0], ha, atol=1e-15) and np.allclose(h[1], hb, atol=1e-15)


def test_backward_sum_and_disconnected():
    w = Tensor(np.arange(6.0).reshape(2, 3), True)
    other = Tensor(np.ones(4), True)
    with recording() as tape:
        loss = sum_all(w)
    backward(loss, tape, [w, other])
    assert np.array_equal(w.grad, np.ones((2, 3)))
    assert np.array_equal(other.grad, np.zeros(4))
    assert len(tape) == 0


def test_backward_rejects_non_scalar():
    w = Tensor(np.ones(3), True)
    with recording() as tape:
        y = relu(w)
    with pytest.raises(ConfigError):
        backward(y, tape)


def test_tape_records_in_topological_order(rng):
    W = Tensor(rng.normal(size=(2, 2)), True)
    with recording() as tape:
        h = relu(linear(Tensor(np.ones((1, 2))), W, Tensor(np.zeros(2))))
        loss = sum_all(h)
    seen = set()
    for node in tape.nodes:
        for inp in node.inputs:
            if inp._from_op:
                assert id(inp) in seen
        seen.add(id(node.out))
    assert not W._from_op
    backward(loss, tape, [W])


def test_no_recording_without_tape(rng):
    W = Tensor(rng.normal(size=(2, 2)), True)
    y = linear(Tensor(np.ones((1, 2))), W, Tensor(np.zeros(2)))
    assert not y.requires_grad


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_non_finite_results_raise():
    with pytest.raises(NumericError):
        linear(Tensor([[1e308, 1e308]]), Tensor([[1e308], [1e308]]), Tensor([0.0]))


def test_adam_zero_gradient_is_fixed_point(rng):
    p = {"w": rng.normal(size=(3, 3))}
    before = p["w"].copy()
    state = AdamState(lr=0.1)
    for _ in range(5):
        adam_step(p, {"w": np.zeros((3, 3))}, state)
    assert np.array_equal(p["w"], before)
    assert state.t == 5


def test_adam_first_step_closed_form():
    # f(w) = w^2 at w0 = 1: g = 2, m_hat = g, v_hat = g^2
    p = {"w": np.array([1.0])}
    adam_step(p, {"w": np.array([2.0])}, AdamState(lr=0.1))
    expect = 1.0 - 0.1 * 2.0 / (math.sqrt(4.0) + 1e-8)
    assert p["w"][0] == pytest.approx(expect, abs=1e-15)


def test_adam_constant_gradient_step_tends_to_lr():
    p = {"w": np.array([0.0])}
    state = AdamState(lr=0.01)
    steps = []
    for _ in range(5000):
        before = p["w"][0]
        adam_step(p, {"w": np.array([0.3])}, state)
        steps.append(before - p["w"][0])
    assert steps[-1] == pytest.approx(0.01, rel=1e-6)
    # bias correction makes even the first step lr-sized
    assert steps[0] == pytest.approx(0.01, rel=1e-6)


def test_adam_nan_aborts_without_mutation():
    p = {"w": np.array([1.0, 2.0])}
    state = AdamState(lr=0.1)
    with pytest.raises(NumericError):
        adam_step(p, {"w": np.array([np.nan, 1.0])}, state)
    assert p["w"].tolist() == [1.0, 2.0] and state.t == 0 and not state.m


def test_adam_wrapper_skips_frozen(rng):
    a = Tensor(np.ones(2), True)
    frozen = Tensor(np.ones(2), False)
    opt = Adam({"a": a, "f": frozen}, lr=0.5)
    with recording() as tape:
        loss = sum_all(ops.add(a, frozen))
    backward(loss, tape, [a])
    opt.step()
    assert np.all(a.data < 1.0) and np.array_equal(frozen.data, np.ones(2))


def test_grad_check_linear_function(rng):
    w = Tensor(rng.normal(size=5), True)
    c = Tensor(rng.normal(size=5))
    report = grad_check(lambda: sum_all(ops.mul(w, c)), {"w": w}, tol=1e-10)
    assert report.passed and report.max_rel_err <= 1e-10


def test_grad_check_flags_relu_kink():
    w = Tensor(np.array([0.0, 1.0]), True)
    report = grad_check(lambda: sum_all(relu(w)), {"w": w})
    assert report.excluded == [("w", 0)]
    assert report.passed and report.n_checked == 1


def test_grad_check_reports_a_wrong_gradient():
    w = Tensor(np.array([1.0, 2.0]), True)

    def broken():
        # value is w^2 but the recorded gradient is only w
        out = ops.mul(w, Tensor(w.data.copy()))
        return sum_all(out)

    report = grad_check(broken, {"w": w})
    assert not report.passed and {f[1] for f in report.failures} == {0, 1}
