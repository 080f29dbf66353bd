import numpy as np
import pytest

from lpdgcn.autodiff import GradientMap, Tape, Tensor, backward, multiply, sum_all
from lpdgcn.gradcheck import finite_difference_check
from lpdgcn.nn import (MlpParams, load_checkpoint, make_mlp, mlp_forward,
                       mlp_named_params, mlp_named_state, save_checkpoint)
from lpdgcn.optim import AdamState, Hyper, adam_step, lr_at_epoch


def test_make_mlp_deterministic_and_zero_biases():
    a = make_mlp(123, 5, 8, 4, with_bn=True)
    b = make_mlp(123, 5, 8, 4, with_bn=True)
    assert np.array_equal(a.w1.values, b.w1.values)
    assert np.array_equal(a.w2.values, b.w2.values)
    assert np.all(a.b1.values == 0)
    assert a.b2 is None  # batch norm absorbs any constant shift
    assert np.all(a.bn.beta.values == 0)
    c = make_mlp(124, 5, 8, 4, with_bn=True)
    assert not np.array_equal(a.w1.values, c.w1.values)


def test_make_mlp_widths_chain():
    p = make_mlp(0, 7, 11, 3, with_bn=False)
    assert p.w1.shape == (7, 11) and p.b1.shape == (11,)
    assert p.w2.shape == (11, 3) and p.b2.shape == (3,)
    assert p.bn is None
    x = Tensor(np.zeros((2, 7)))
    assert mlp_forward(p, x).shape == (2, 3)


def test_glorot_bound():
    from lpdgcn.nn import glorot_uniform
    w = glorot_uniform(np.random.default_rng(0), 6, 6)
    bound = np.sqrt(6.0 / 12.0)
    assert np.abs(w).max() <= bound
    assert np.abs(w).max() > 0.5 * bound  # actually fills the range


def test_mlp_zero_input_zero_output():
    p = make_mlp(5, 3, 4, 2, with_bn=False)
    out = mlp_forward(p, Tensor(np.zeros((3, 3))))
    assert np.array_equal(out.values, np.zeros((3, 2)))


def test_mlp_identity_configuration():
    p = make_mlp(0, 2, 2, 2, with_bn=False)
    p.w1.values = np.eye(2)
    p.w2.values = np.eye(2)
    x = Tensor(np.array([[0.5, 1.5], [2.0, 0.0]]))
    assert np.array_equal(mlp_forward(p, x).values, x.values)


def test_mlp_with_bn_gradcheck():
    p = make_mlp(9, 3, 4, 2, with_bn=True)
    rng = np.random.default_rng(10)
    x = Tensor(rng.normal(size=(6, 3)))
    w = Tensor(rng.normal(size=(6, 2)))

    def f():
        p.bn.running_mean[:] = 0  # keep repeated calls value-deterministic
        p.bn.running_var[:] = 1
        return sum_all(multiply(mlp_forward(p, x, mode="train"), w))

    err = finite_difference_check(f, [t for _, t in mlp_named_params("m", p)])
    assert err <= 1e-5


def test_named_params_cover_bn():
    p = make_mlp(1, 3, 4, 2, with_bn=True)
    names = [n for n, _ in mlp_named_params("conv.1", p)]
    assert names == ["conv.1.w1", "conv.1.b1", "conv.1.w2",
                     "conv.1.bn.gamma", "conv.1.bn.beta"]
    snames = [n for n, _ in mlp_named_state("conv.1", p)]
    assert snames == ["conv.1.bn.running_mean", "conv.1.bn.running_var"]
    assert mlp_named_state("x", make_mlp(1, 3, 4, 2, with_bn=False)) == []


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_round_trip_bit_exact(tmp_path):
    p = make_mlp(7, 3, 4, 2, with_bn=True)
    p.bn.running_mean[:] = np.random.default_rng(3).normal(size=2)
    path = str(tmp_path / "ckpt.json")
    save_checkpoint(path, mlp_named_params("m", p), mlp_named_state("m", p))
    q = make_mlp(8, 3, 4, 2, with_bn=True)
    load_checkpoint(path, mlp_named_params("m", q), mlp_named_state("m", q))
    # float64 repr round-trips bit-exactly
    assert q.w1.values.tobytes() == p.w1.values.tobytes()
    assert q.w2.values.tobytes() == p.w2.values.tobytes()
    assert q.bn.running_mean.tobytes() == p.bn.running_mean.tobytes()


def test_checkpoint_float32_value_exact(tmp_path):
    p = make_mlp(7, 3, 4, 2, with_bn=False, dtype=np.float32)
    path = str(tmp_path / "ckpt.json")
    save_checkpoint(path, mlp_named_params("m", p), [])
    q = make_mlp(9, 3, 4, 2, with_bn=False, dtype=np.float32)
    load_checkpoint(path, mlp_named_params("m", q), [])
    assert np.array_equal(q.w1.values, p.w1.values)
    assert q.w1.values.dtype == np.float32


def test_checkpoint_name_mismatch(tmp_path):
    p = make_mlp(7, 3, 4, 2, with_bn=False)
    path = str(tmp_path / "ckpt.json")
    save_checkpoint(path, mlp_named_params("m", p), [])
    q = make_mlp(7, 3, 4, 2, with_bn=True)
    with pytest.raises(ValueError, match="does not match"):
        load_checkpoint(path, mlp_named_params("m", q), mlp_named_state("m", q))


def test_checkpoint_shape_mismatch(tmp_path):
    p = make_mlp(7, 3, 4, 2, with_bn=False)
    path = str(tmp_path / "ckpt.json")
    save_checkpoint(path, mlp_named_params("m", p), [])
    q = make_mlp(7, 3, 5, 2, with_bn=False)
    with pytest.raises(ValueError, match="shape"):
        load_checkpoint(path, mlp_named_params("m", q), [])


# ---------------------------------------------------------------------------
# learning-rate schedule


def test_lr_schedule_points():
    h = Hyper()
    assert lr_at_epoch(h, 0) == 0.01
    assert lr_at_epoch(h, 19) == 0.01
    assert lr_at_epoch(h, 20) == 0.005
    assert lr_at_epoch(h, 39) == 0.005
    assert lr_at_epoch(h, 45) == 0.0025
    with pytest.raises(ValueError):
        lr_at_epoch(h, -1)


def test_hyper_validation():
    with pytest.raises(ValueError):
        Hyper(base_lr=0.0)
    with pytest.raises(ValueError):
        Hyper(decay_factor=0.0)
    with pytest.raises(ValueError):
        Hyper(batch_size=1)
    with pytest.raises(ValueError):
        Hyper(dropout_p=1.0)
    with pytest.raises(ValueError):
        Hyper(lam=-0.1)


# ---------------------------------------------------------------------------
# adam


class _FixedGrads:
    def __init__(self, mapping):
        self._m = mapping

    def of(self, t):
        return self._m.get(id(t), np.zeros_like(t.values))


def test_adam_first_step_magnitude():
    p = Tensor(np.array([1.0, -1.0, 0.5]), requires_grad=True)
    g = np.array([0.3, -0.2, 4.0])
    named = [("p", p)]
    state = AdamState.for_params(named)
    before = p.values.copy()
    adam_step(named, _FixedGrads({id(p): g}), state, lr=0.01)
    # first bias-corrected step is lr * g/|g| up to the eps denominator
    step = before - p.values
    assert np.allclose(step, 0.01 * np.sign(g), rtol=1e-6)
    assert state.t == 1
    assert np.all(state.v["p"] >= 0)


def test_adam_zero_gradient_is_identity():
    p = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    named = [("p", p)]
    state = AdamState.for_params(named)
    before = p.values.copy()
    for _ in range(3):
        adam_step(named, _FixedGrads({}), state, lr=0.1)
    assert np.array_equal(p.values, before)
    assert state.t == 3


def test_adam_converges_on_quadratic():
    theta = Tensor(np.array([1.0, 1.0]), requires_grad=True)
    named = [("theta", theta)]
    state = AdamState.for_params(named)
    for _ in range(100):
        with Tape() as tape:
            loss = sum_all(multiply(theta, theta))
        grads = backward(tape, loss)
        adam_step(named, grads, state, lr=0.1)
    assert float(np.linalg.norm(theta.values)) < 0.05


def test_adam_shape_mismatch_rejected():
    p = Tensor(np.zeros(3), requires_grad=True)
    named = [("p", p)]
    state = AdamState.for_params(named)
    with pytest.raises(ValueError, match="shape"):
        adam_step(named, _FixedGrads({id(p): np.zeros(4)}), state, lr=0.1)
    with pytest.raises(ValueError, match="lr"):
        adam_step(named, _FixedGrads({}), state, lr=-0.1)
