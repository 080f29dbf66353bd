import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpdgcn.autodiff import (BatchNormState, Tape, Tensor, add, backward,
                             batch_norm, concat_features, dropout, gather_rows,
                             linear, matmul, mul_colvec, mul_scalar, multiply,
                             neighbor_sum, relu, row_sum, scale, segment_sum,
                             slice_cols, softmax_cross_entropy, softmax_rows,
                             softplus, sqrt_scalar, subtract, sum_all)
from lpdgcn.gradcheck import finite_difference_check


def leaf(values, dtype=np.float64):
    return Tensor(np.asarray(values, dtype=dtype), requires_grad=True)


# ---------------------------------------------------------------------------
# linear / relu


def test_linear_identity_input():
    x = Tensor(np.eye(2))
    w = leaf([[1.0, 2.0], [3.0, 4.0]])
    b = leaf([0.0, 0.0])
    out = linear(x, w, b)
    assert out.values.tolist() == [[1.0, 2.0], [3.0, 4.0]]


def test_linear_bias_gradient_is_row_count():
    x = Tensor(np.random.default_rng(0).normal(size=(5, 3)))
    w = leaf(np.zeros((3, 2)))
    b = leaf(np.zeros(2))
    with Tape() as tape:
        loss = sum_all(linear(x, w, b))
    grads = backward(tape, loss)
    assert np.array_equal(grads.of(b), np.full(2, 5.0))


def test_linear_gradcheck_random():
    rng = np.random.default_rng(3)
    x = leaf(rng.normal(size=(3, 4)))
    w = leaf(rng.normal(size=(4, 2)))
    b = leaf(rng.normal(size=2))
    err = finite_difference_check(lambda: sum_all(linear(x, w, b)), [x, w, b])
    assert err <= 1e-6


def test_relu_values_and_mask():
    x = leaf([-1.0, 0.0, 2.0])
    with Tape() as tape:
        loss = sum_all(relu(x))
    assert relu(x).values.tolist() == [0.0, 0.0, 2.0]
    g = backward(tape, loss).of(x)
    # mask is the indicator of x > 0 (zero stays closed)
    assert g.tolist() == [0.0, 0.0, 1.0]


def test_relu_linear_composed_gradcheck():
    rng = np.random.default_rng(5)
    x = Tensor(rng.normal(size=(4, 3)))
    w = leaf(rng.normal(size=(3, 3)))
    b = leaf(rng.normal(size=3))
    err = finite_difference_check(lambda: sum_all(relu(linear(x, w, b))), [w, b])
    assert err <= 1e-6


# ---------------------------------------------------------------------------
# graph aggregation


def test_neighbor_sum_path_oracle():
    # path a-b-c with identity features: a sees b, b sees a+c, c sees b
    x = leaf(np.eye(3))
    edges = [(0, 1), (1, 0), (1, 2), (2, 1)]
    out = neighbor_sum(x, edges)
    expected = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=np.float64)
    assert np.array_equal(out.values, expected)


def test_neighbor_sum_no_edges_is_zero():
    x = leaf(np.ones((4, 2)))
    out = neighbor_sum(x, np.zeros((0, 2), dtype=np.int64))
    assert np.array_equal(out.values, np.zeros((4, 2)))


def test_neighbor_sum_bad_edges():
    x = leaf(np.ones((3, 2)))
    with pytest.raises(ValueError, match="out of range"):
        neighbor_sum(x, [(0, 3)])
    with pytest.raises(ValueError, match="index array"):
        neighbor_sum(x, [(0, 1, 2)])


def dense_adjacency(edges, n):
    a = np.zeros((n, n))
    for s, d in edges:
        a[d, s] += 1.0
    return a


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_neighbor_sum_equals_dense_matmul(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 7))
    pairs = [(u, v) for u in range(n) for v in range(n) if rng.random() < 0.4]
    edges = np.asarray(pairs, dtype=np.int64).reshape(len(pairs), 2)
    x = Tensor(rng.integers(-5, 6, size=(n, 3)).astype(np.float64))
    out = neighbor_sum(x, edges)
    assert np.array_equal(out.values, dense_adjacency(edges, n) @ x.values)


def test_neighbor_sum_gradcheck():
    rng = np.random.default_rng(11)
    x = leaf(rng.normal(size=(5, 2)))
    edges = [(0, 1), (1, 0), (2, 3), (3, 2), (4, 0), (0, 4)]
    err = finite_difference_check(lambda: sum_all(neighbor_sum(x, edges)), [x])
    assert err <= 1e-6


def test_segment_sum_examples():
    x = leaf([[1.0], [2.0], [3.0]])
    out = segment_sum(x, [0, 0, 1], 2)
    assert out.values.tolist() == [[3.0], [3.0]]
    out3 = segment_sum(x, [0, 0, 1], 3)
    assert out3.values.tolist() == [[3.0], [3.0], [0.0]]


def naive_segment_sum(x, seg, num_segments):
    out = np.zeros((num_segments, x.shape[1]))
    for row, s in zip(x, seg):
        out[s] += row
    return out


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_segment_sum_equals_naive_loop(seed):
    rng = np.random.default_rng(seed)
    n, b = int(rng.integers(1, 9)), int(rng.integers(1, 5))
    x = Tensor(rng.integers(-5, 6, size=(n, 2)).astype(np.float64))
    seg = rng.integers(0, b, size=n)
    out = segment_sum(x, seg, b)
    assert np.array_equal(out.values, naive_segment_sum(x.values, seg, b))


def test_segment_sum_gradient_scatters_back():
    x = leaf([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    with Tape() as tape:
        pooled = segment_sum(x, [1, 0, 1], 2)
        loss = sum_all(mul_colvec(pooled, Tensor([[2.0], [5.0]])))
    g = backward(tape, loss).of(x)
    assert g.tolist() == [[5.0, 5.0], [2.0, 2.0], [5.0, 5.0]]


def test_gather_rows_roundtrip():
    x = leaf([[1.0, 2.0], [3.0, 4.0]])
    with Tape() as tape:
        out = gather_rows(x, [1, 0, 1])
        loss = sum_all(out)
    assert out.values.tolist() == [[3.0, 4.0], [1.0, 2.0], [3.0, 4.0]]
    assert backward(tape, loss).of(x).tolist() == [[1.0, 1.0], [2.0, 2.0]]


# ---------------------------------------------------------------------------
# concat / slice


def test_concat_zero_width_is_identity():
    x = leaf(np.arange(6.0).reshape(3, 2))
    empty = Tensor(np.zeros((3, 0)))
    assert np.array_equal(concat_features(x, empty).values, x.values)


def test_concat_slice_gradcheck():
    rng = np.random.default_rng(7)
    a = leaf(rng.normal(size=(3, 2)))
    b = leaf(rng.normal(size=(3, 4)))

    def f():
        cat = concat_features(a, b)
        return sum_all(multiply_pieces(cat))

    def multiply_pieces(cat):
        left = slice_cols(cat, 0, 2)
        right = slice_cols(cat, 2, 6)
        return concat_features(relu(left), relu(right))

    err = finite_difference_check(f, [a, b])
    assert err <= 1e-6


# ---------------------------------------------------------------------------
# softmax family


def test_cross_entropy_uniform_logits():
    logits = leaf(np.zeros((4, 2)))
    loss = softmax_cross_entropy(logits, [0, 1, 0, 1])
    assert loss.values == pytest.approx(4 * math.log(2.0), rel=1e-12)
    logits7 = leaf(np.zeros((3, 7)))
    loss7 = softmax_cross_entropy(logits7, [0, 3, 6])
    assert loss7.values == pytest.approx(3 * math.log(7.0), rel=1e-12)


def test_cross_entropy_peaked_logits_vanishes():
    logits = leaf([[50.0, 0.0], [0.0, 50.0]])
    loss = softmax_cross_entropy(logits, [0, 1])
    assert float(loss.values) < 1e-8


def test_cross_entropy_matches_direct_formula():
    rng = np.random.default_rng(13)
    lv = rng.normal(size=(5, 4))
    targets = rng.integers(0, 4, size=5)
    p = np.exp(lv) / np.exp(lv).sum(axis=1, keepdims=True)
    expected = -np.log(p[np.arange(5), targets]).sum()
    loss = softmax_cross_entropy(leaf(lv), targets)
    assert float(loss.values) == pytest.approx(expected, rel=1e-10)


def test_cross_entropy_gradcheck():
    rng = np.random.default_rng(17)
    logits = leaf(rng.normal(size=(4, 3)))
    err = finite_difference_check(
        lambda: softmax_cross_entropy(logits, [0, 2, 1, 1]), [logits])
    assert err <= 1e-6


def test_cross_entropy_rejects_bad_targets():
    logits = leaf(np.zeros((2, 3)))
    with pytest.raises(ValueError, match="out of range"):
        softmax_cross_entropy(logits, [0, 3])


def test_softmax_rows_sum_to_one():
    rng = np.random.default_rng(19)
    out = softmax_rows(Tensor(rng.normal(size=(6, 4)) * 10))
    assert np.allclose(out.values.sum(axis=1), 1.0, atol=1e-12)
    assert out.values.min() >= 0


def test_softmax_rows_gradcheck():
    x = leaf(np.random.default_rng(23).normal(size=(3, 4)))
    v = Tensor(np.random.default_rng(24).normal(size=(3, 4)))
    err = finite_difference_check(
        lambda: sum_all(multiply(softmax_rows(x), v)), [x])
    assert err <= 1e-6


# ---------------------------------------------------------------------------
# batch norm


def test_batch_norm_train_standardizes():
    rng = np.random.default_rng(29)
    x = Tensor(rng.normal(loc=3.0, scale=2.0, size=(64, 5)))
    state = BatchNormState.create(5)
    out = batch_norm(x, state, "train").values
    assert np.allclose(out.mean(axis=0), 0.0, atol=1e-5)
    assert np.allclose(out.var(axis=0), 1.0, atol=1e-4)


def test_batch_norm_running_stats_update():
    x = Tensor(np.array([[0.0], [2.0]]))
    state = BatchNormState.create(1)
    batch_norm(x, state, "train")
    # new = 0.9 * old + 0.1 * batch, biased batch variance
    assert state.running_mean[0] == pytest.approx(0.1 * 1.0)
    assert state.running_var[0] == pytest.approx(0.9 * 1.0 + 0.1 * 1.0)
    assert np.all(state.running_var >= 0)


def test_batch_norm_eval_is_affine():
    state = BatchNormState.create(3)
    state.gamma.values[:] = [2.0, 1.0, 0.5]
    state.beta.values[:] = [1.0, 0.0, -1.0]
    x = Tensor(np.array([[1.0, -2.0, 4.0]]))
    out = batch_norm(x, state, "eval").values
    expected = state.gamma.values * x.values + state.beta.values
    assert np.allclose(out, expected, atol=1e-4)


def test_batch_norm_train_rejects_single_row():
    state = BatchNormState.create(2)
    with pytest.raises(ValueError, match="at least 2 rows"):
        batch_norm(Tensor(np.ones((1, 2))), state, "train")


def test_batch_norm_train_gradcheck():
    rng = np.random.default_rng(31)
    x = leaf(rng.normal(size=(6, 3)))
    state = BatchNormState.create(3)
    state.gamma.values[:] = rng.normal(size=3)
    state.beta.values[:] = rng.normal(size=3)
    v = rng.normal(size=(6, 3))

    def f():
        # freeze running stats so repeated calls stay value-deterministic
        state.running_mean[:] = 0
        state.running_var[:] = 1
        out = batch_norm(x, state, "train")
        return sum_all(mul_colvec(out, Tensor(v[:, :1])))

    err = finite_difference_check(f, [x, state.gamma, state.beta])
    assert err <= 1e-5


def test_batch_norm_eval_gradcheck():
    rng = np.random.default_rng(37)
    x = leaf(rng.normal(size=(4, 3)))
    state = BatchNormState.create(3)
    state.running_mean[:] = rng.normal(size=3)
    state.running_var[:] = rng.uniform(0.5, 2.0, size=3)
    err = finite_difference_check(
        lambda: sum_all(relu(batch_norm(x, state, "eval"))),
        [x, state.gamma, state.beta])
    assert err <= 1e-6


# ---------------------------------------------------------------------------
# dropout


def test_dropout_p_zero_is_identity():
    x = leaf(np.ones((3, 3)))
    rng = np.random.default_rng(0)
    assert dropout(x, 0.0, "train", rng) is x
    assert dropout(x, 0.0, "eval") is x


def test_dropout_eval_is_identity():
    x = leaf(np.ones((3, 3)))
    assert dropout(x, 0.9, "eval") is x


def test_dropout_train_statistics():
    x = Tensor(np.ones((1000, 100)))
    out = dropout(x, 0.5, "train", np.random.default_rng(41)).values
    keep_rate = (out != 0).mean()
    assert abs(keep_rate - 0.5) < 0.01
    # inverted scaling keeps the expectation
    assert abs(out.mean() - 1.0) < 0.02
    assert set(np.unique(out)) == {0.0, 2.0}


def test_dropout_gradient_masks_and_scales():
    x = leaf(np.ones((20, 5)))
    with Tape() as tape:
        out = dropout(x, 0.5, "train", np.random.default_rng(43))
        loss = sum_all(out)
    g = backward(tape, loss).of(x)
    assert np.array_equal(g != 0, out.values != 0)
    assert set(np.unique(g)) == {0.0, 2.0}


def test_dropout_rejects_bad_rate():
    x = leaf(np.ones((2, 2)))
    with pytest.raises(ValueError, match="dropout rate"):
        dropout(x, 1.0, "train", np.random.default_rng(0))
    with pytest.raises(ValueError, match="needs an rng"):
        dropout(x, 0.5, "train")


# ---------------------------------------------------------------------------
# tape mechanics


def test_sum_gradient_is_ones():
    w = leaf(np.zeros((2, 2)))
    with Tape() as tape:
        loss = sum_all(w)
    assert np.array_equal(backward(tape, loss).of(w), np.ones((2, 2)))


def test_zero_scaled_loss_has_zero_gradients():
    w = leaf([[1.0, 2.0], [3.0, 4.0]])
    with Tape() as tape:
        loss = scale(sum_all(relu(w)), 0.0)
    assert np.array_equal(backward(tape, loss).of(w), np.zeros((2, 2)))


def test_untouched_parameter_gets_zeros():
    w = leaf(np.ones(3))
    other = leaf(np.ones((2, 2)))
    with Tape() as tape:
        loss = sum_all(other)
    grads = backward(tape, loss)
    assert w not in grads
    assert np.array_equal(grads.of(w), np.zeros(3))


def test_backward_requires_scalar():
    w = leaf(np.ones((2, 2)))
    with Tape() as tape:
        out = relu(w)
    with pytest.raises(ValueError, match="scalar"):
        backward(tape, out)


def test_backward_bit_identical_across_runs():
    rng = np.random.default_rng(47)
    x = leaf(rng.normal(size=(8, 4)))
    w = leaf(rng.normal(size=(4, 4)))

    def grads_once():
        with Tape() as tape:
            h = relu(matmul(x, w))
            pooled = segment_sum(h, [0, 0, 1, 1, 2, 2, 3, 3], 4)
            loss = softmax_cross_entropy(pooled, [0, 1, 2, 3])
        g = backward(tape, loss)
        return g.of(x).copy(), g.of(w).copy()

    gx1, gw1 = grads_once()
    gx2, gw2 = grads_once()
    assert np.array_equal(gx1, gx2) and gx1.tobytes() == gx2.tobytes()
    assert np.array_equal(gw1, gw2) and gw1.tobytes() == gw2.tobytes()


def test_no_tape_records_outside_context():
    x = leaf(np.ones((2, 2)))
    out = relu(x)  # no active tape: plain value computation
    assert Tape.active() is None
    assert np.array_equal(out.values, x.values)


def test_nested_tapes_record_innermost():
    # ops on leaves land on the innermost tape only; an inner tape does not
    # adopt the outer tape's intermediates
    x = leaf(np.ones((2, 2)))
    with Tape() as outer:
        y = relu(x)
        with Tape() as inner:
            z = relu(x)
            untracked = relu(y)  # outer's intermediate: not inner's product
        assert len(inner.records) == 1
        assert inner.records[0].output is z
        assert not inner.tracks(untracked)
    assert len(outer.records) == 1
    assert outer.records[0].output is y


# ---------------------------------------------------------------------------
# scalar helpers and misc ops


def test_scalar_op_examples():
    s = leaf(np.asarray(2.0))
    x = leaf([[1.0, -1.0]])
    assert mul_scalar(x, s).values.tolist() == [[2.0, -2.0]]
    assert softplus(leaf(np.asarray([0.0]))).values[0] == pytest.approx(math.log(2.0))
    assert float(sqrt_scalar(leaf(np.asarray(9.0))).values) == 3.0
    assert subtract(x, x).values.tolist() == [[0.0, 0.0]]
    assert add(x, x).values.tolist() == [[2.0, -2.0]]


@pytest.mark.parametrize("seed", range(25))
def test_composite_op_gradcheck_random_seeds(seed):
    rng = np.random.default_rng(seed)
    x = leaf(rng.normal(size=(5, 3)))
    w = leaf(rng.normal(size=(3, 3)))
    s = leaf(np.asarray(rng.normal()))
    edges = [(0, 1), (1, 0), (1, 2), (2, 1), (3, 4), (4, 3)]

    def f():
        h = relu(matmul(mul_scalar(x, softplus(s)), w))
        agg = neighbor_sum(h, edges)
        pooled = segment_sum(concat_features(h, agg), [0, 0, 0, 1, 1], 2)
        return softmax_cross_entropy(pooled, [0, 1])

    err = finite_difference_check(f, [x, w, s])
    assert err <= 1e-5
