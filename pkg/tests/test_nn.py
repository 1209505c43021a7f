import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from elcgen.nn import (AdamState, Attention, CheckpointError, GRUCell, Linear, LSTMCell, NonFiniteGradientError,
                       ParamStore, adam_update, grad_check, load_checkpoint, log_softmax, save_checkpoint, sigmoid,
                       softmax)
from gradcheck_cases import CASES, EPS, TOL


def _zero(store):
    for p in store.params.values():
        p[...] = 0.0


def test_gru_zero_weights():
    store = ParamStore()
    cell = GRUCell(store, "g", 3, 4, np.random.default_rng(0))
    _zero(store)
    h_prev = np.array([[0.2, -1.0, 3.0, 0.5]])
    h, _ = cell.step(h_prev, np.ones((1, 3)))
    np.testing.assert_allclose(h, 0.5 * h_prev, atol=1e-15)
    h0, _ = cell.step(np.zeros((1, 4)), np.ones((1, 3)))
    np.testing.assert_array_equal(h0, 0.0)


def test_lstm_zero_weights():
    store = ParamStore()
    cell = LSTMCell(store, "l", 3, 4, np.random.default_rng(0))
    _zero(store)
    c_prev = np.array([[1.0, -2.0, 0.3, 0.0]])
    h, c, _ = cell.step(np.ones((1, 4)), c_prev, np.ones((1, 3)))
    np.testing.assert_allclose(c, 0.5 * c_prev, atol=1e-15)
    np.testing.assert_allclose(h, 0.5 * np.tanh(c), atol=1e-15)
    h, c, _ = cell.step(np.zeros((1, 4)), np.zeros((1, 4)), np.ones((1, 3)))
    assert not h.any() and not c.any()


def test_dimension_mismatch_raises():
    store = ParamStore()
    cell = GRUCell(store, "g", 3, 4, np.random.default_rng(0))
    with pytest.raises(ValueError, match="expected"):
        cell.step(np.zeros((1, 5)), np.zeros((1, 3)))


def _scalar_attention(att, h, S):
    """Independent per-element recomputation of additive attention."""
    B, T, _ = S.shape
    alphas = np.zeros((B, T))
    ctx = np.zeros((B, S.shape[2]))
    for b in range(B):
        scores = []
        for i in range(T):
            pre = [sum(att.W_h[a, k] * h[b, k] for k in range(h.shape[1]))
                   + sum(att.W_s[a, k] * S[b, i, k] for k in range(S.shape[2])) + att.b[a]
                   for a in range(att.attn_dim)]
            scores.append(sum(att.v[a] * np.tanh(pre[a]) for a in range(att.attn_dim)))
        m = max(scores)
        ex = [np.exp(s - m) for s in scores]
        tot = sum(ex)
        for i in range(T):
            alphas[b, i] = ex[i] / tot
            ctx[b] += alphas[b, i] * S[b, i]
    return alphas, ctx


def test_attention_examples():
    rng = np.random.default_rng(5)
    store = ParamStore()
    att = Attention(store, "a", 3, 4, 5, rng)
    h = rng.normal(size=(2, 3))
    S1 = rng.normal(size=(2, 1, 4))
    alpha, ctx, _ = att.step(h, S1)
    np.testing.assert_array_equal(alpha, 1.0)
    np.testing.assert_array_equal(ctx, S1[:, 0])
    same = np.repeat(S1, 6, axis=1)
    alpha, ctx, _ = att.step(h, same)
    np.testing.assert_allclose(alpha, 1 / 6, atol=1e-15)
    np.testing.assert_allclose(ctx, S1[:, 0], atol=1e-14)
    S = rng.normal(size=(2, 7, 4))
    alpha, ctx, _ = att.step(h, S)
    ref_a, ref_c = _scalar_attention(att, h, S)
    np.testing.assert_allclose(alpha, ref_a, atol=1e-12)
    np.testing.assert_allclose(ctx, ref_c, atol=1e-12)
    np.testing.assert_allclose(alpha.sum(axis=1), 1.0, atol=1e-15)
    with pytest.raises(ValueError):
        att.step(h, np.zeros((2, 0, 4)))


@given(st.lists(st.floats(-700, 700), min_size=1, max_size=20))
def test_softmax_simplex(xs):
    p = softmax(np.array(xs))
    assert np.all(p >= 0)
    assert abs(p.sum() - 1.0) < 1e-12
    np.testing.assert_allclose(np.exp(log_softmax(np.array(xs))), p, atol=1e-12)


@given(st.floats(-1000, 1000))
def test_sigmoid_stable(x):
    s = sigmoid(np.array([x]))[0]
    assert 0.0 <= s <= 1.0
    assert np.isfinite(s)


def test_grad_check_linear_exact():
    rng = np.random.default_rng(0)
    store = ParamStore()
    lin = Linear(store, "lin", 4, 3, rng)
    x = rng.normal(size=(5, 4))
    w = rng.normal(size=(5, 3))

    def loss():
        store.zero_grad()
        y, cache = lin.forward(x)
        lin.backward(cache, w)
        return float(np.sum(w * y))

    assert grad_check(loss, store)[0] <= 1e-7


def test_grad_check_detects_corruption():
    loss, store = CASES["gru_bptt20"]()

    def corrupted():
        val = loss()
        store.grads["gru.W_z"] *= 1.1
        return val

    assert grad_check(corrupted, store)[0] > 1e-2


def test_gru_bptt10():
    from gradcheck_cases import gru_case
    loss, store = gru_case(steps=10)
    assert grad_check(loss, store, eps=EPS, floor=1e-5)[0] <= TOL


@pytest.mark.parametrize("name", ["gru_bptt20", "lstm_bptt20", "attention"])
def test_cell_gradients(name):
    loss, store = CASES[name]()
    assert grad_check(loss, store, eps=EPS, floor=1e-5)[0] <= TOL


def test_adam_zero_gradient_keeps_params():
    store = ParamStore()
    store.add("w", np.arange(4.0))
    before = store.snapshot()
    adam_update(store, AdamState(lr=0.1))
    np.testing.assert_array_equal(store["w"], before["w"])


def test_sgd_mode_literal_step():
    store = ParamStore()
    store.add("w", np.array([1.0, -2.0]))
    store.grads["w"][...] = [0.5, -1.0]
    adam_update(store, AdamState(lr=0.1, sgd=True))
    np.testing.assert_array_equal(store["w"], [1.0 - 0.1 * 0.5, -2.0 + 0.1 * 1.0])


def test_adam_sign_like_step():
    store = ParamStore()
    store.add("w", np.zeros(3))
    store.grads["w"][...] = [2.0, -0.5, 1e-3]
    adam_update(store, AdamState(lr=0.01, beta1=0.0, beta2=0.0, eps=1e-12))
    np.testing.assert_allclose(store["w"], [-0.01, 0.01, -0.01], rtol=1e-6)


def test_adam_nan_gradient_untouched():
    store = ParamStore()
    store.add("w", np.ones(3))
    store.grads["w"][1] = np.nan
    st_ = AdamState()
    with pytest.raises(NonFiniteGradientError):
        adam_update(store, st_)
    np.testing.assert_array_equal(store["w"], 1.0)
    assert st_.step == 0


def test_checkpoint_roundtrip_and_validation(tmp_path):
    rng = np.random.default_rng(0)
    a, b = ParamStore(), ParamStore()
    GRUCell(a, "g", 2, 3, rng)
    GRUCell(b, "g", 2, 3, rng)
    p = str(tmp_path / "ck.json")
    save_checkpoint(p, a, extra={"k": 1})
    assert load_checkpoint(p, b) == {"k": 1}
    for k in a:
        np.testing.assert_array_equal(a[k], b[k])
    c = ParamStore()
    GRUCell(c, "g", 2, 4, rng)
    with pytest.raises(CheckpointError, match="shape"):
        load_checkpoint(p, c)
    d = ParamStore()
    GRUCell(d, "other", 2, 3, rng)
    with pytest.raises(CheckpointError, match="mismatch"):
        load_checkpoint(p, d)
    doc = json.loads(open(p).read())
    doc["format_version"] = 99
    open(p, "w").write(json.dumps(doc))
    with pytest.raises(CheckpointError, match="version"):
        load_checkpoint(p, b)
