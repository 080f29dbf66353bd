"""Dense tensors plus a reverse-mode differentiation tape.

Small op set aimed at message-passing networks: affine maps, ReLU/softplus,
scatter/gather aggregation over edge and segment indices, batch norm,
inverted dropout, row softmax and a fused softmax cross entropy. Arrays are
plain numpy; shapes are scalars (), vectors (n,) or matrices (n, m).

Ops record onto the innermost active Tape only when some input is tracked
(a requires_grad leaf or a tensor the tape itself produced). backward()
replays the records in reverse and returns a GradientMap. Accumulation
order is fixed by record order, so two backward passes over identical
tapes produce bit-identical gradients.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np


class Tensor:
    """A numpy array plus a requires_grad flag. Values are mutable on
    purpose: optimizers update leaves in place between tape lifetimes."""

    __slots__ = ("values", "requires_grad")

    def __init__(self, values, requires_grad: bool = False, dtype=None):
        self.values = np.asarray(values, dtype=dtype)
        self.requires_grad = bool(requires_grad)

    @property
    def shape(self):
        return self.values.shape

    @property
    def dtype(self):
        return self.values.dtype

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.values.shape}, dtype={self.values.dtype}{flag})"


@dataclass
class TapeRecord:
    op: str
    inputs: tuple
    output: Tensor
    pull: Callable  # maps d(loss)/d(output) to a tuple of per-input grads


_ACTIVE = threading.local()


def _stack() -> list:
    s = getattr(_ACTIVE, "stack", None)
    if s is None:
        s = []
        _ACTIVE.stack = s
    return s


class Tape:
    """Context manager collecting op records for one forward pass."""

    def __init__(self):
        self.records: list[TapeRecord] = []
        self._tracked: set[int] = set()

    def __enter__(self) -> "Tape":
        _stack().append(self)
        return self

    def __exit__(self, *exc):
        popped = _stack().pop()
        if popped is not self:
            raise RuntimeError("tape context exited out of order")
        return False

    @staticmethod
    def active() -> "Tape | None":
        s = _stack()
        return s[-1] if s else None

    def tracks(self, t: Tensor) -> bool:
        return t.requires_grad or id(t) in self._tracked


def _emit(op: str, inputs: tuple, out_values: np.ndarray, pull: Callable) -> Tensor:
    out = Tensor(out_values)
    tape = Tape.active()
    if tape is not None and any(tape.tracks(t) for t in inputs):
        tape.records.append(TapeRecord(op, inputs, out, pull))
        tape._tracked.add(id(out))
    return out


class GradientMap:
    """Gradients keyed by tensor identity. Tensors the loss never touched
    map to zeros of their own shape/dtype."""

    def __init__(self, grads: dict):
        self._grads = grads

    def of(self, t: Tensor) -> np.ndarray:
        g = self._grads.get(id(t))
        if g is None:
            return np.zeros_like(t.values)
        return g

    def __contains__(self, t: Tensor) -> bool:
        return id(t) in self._grads


def backward(tape: Tape, loss: Tensor) -> GradientMap:
    if loss.values.shape != ():
        raise ValueError(f"loss must be a scalar tensor, got shape {loss.values.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones((), dtype=loss.values.dtype)}
    for rec in reversed(tape.records):
        g = grads.get(id(rec.output))
        if g is None:
            continue
        in_grads = rec.pull(g)
        for t, gi in zip(rec.inputs, in_grads):
            if gi is None or not tape.tracks(t):
                continue
            acc = grads.get(id(t))
            grads[id(t)] = gi if acc is None else acc + gi
    return GradientMap(grads)


def _as2d(t: Tensor, op: str) -> np.ndarray:
    if t.values.ndim != 2:
        raise ValueError(f"{op}: expected a 2-d tensor, got shape {t.values.shape}")
    return t.values


# ---------------------------------------------------------------------------
# elementwise / arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.values.shape != b.values.shape:
        raise ValueError(f"add: shape mismatch {a.values.shape} vs {b.values.shape}")
    return _emit("add", (a, b), a.values + b.values, lambda g: (g, g))


def subtract(a: Tensor, b: Tensor) -> Tensor:
    if a.values.shape != b.values.shape:
        raise ValueError(f"subtract: shape mismatch {a.values.shape} vs {b.values.shape}")
    return _emit("subtract", (a, b), a.values - b.values, lambda g: (g, -g))


def multiply(a: Tensor, b: Tensor) -> Tensor:
    if a.values.shape != b.values.shape:
        raise ValueError(f"multiply: shape mismatch {a.values.shape} vs {b.values.shape}")
    av, bv = a.values, b.values
    return _emit("multiply", (a, b), av * bv, lambda g: (g * bv, g * av))


def scale(x: Tensor, c: float) -> Tensor:
    c = float(c)
    return _emit("scale", (x,), x.values * c, lambda g: (g * c,))


def mul_scalar(x: Tensor, s: Tensor) -> Tensor:
    """Multiply every entry of x by a 0-d tensor s (s is differentiable)."""
    if s.values.shape != ():
        raise ValueError(f"mul_scalar: scalar operand must be 0-d, got {s.values.shape}")
    xv, sv = x.values, s.values

    def pull(g):
        return (g * sv, np.asarray((g * xv).sum(), dtype=xv.dtype))

    return _emit("mul_scalar", (x, s), xv * sv, pull)


def relu(x: Tensor) -> Tensor:
    mask = x.values > 0
    return _emit("relu", (x,), np.where(mask, x.values, 0), lambda g: (np.where(mask, g, 0),))


def softplus(x: Tensor) -> Tensor:
    xv = x.values
    out = np.logaddexp(0.0, xv).astype(xv.dtype, copy=False)
    sig = np.exp(xv - out)  # sigmoid(x), computed stably from the output
    return _emit("softplus", (x,), out, lambda g: (g * sig,))


def sum_all(x: Tensor) -> Tensor:
    xv = x.values
    return _emit("sum_all", (x,), np.asarray(xv.sum(), dtype=xv.dtype),
                 lambda g: (np.broadcast_to(g, xv.shape),))


def sqrt_scalar(x: Tensor) -> Tensor:
    if x.values.shape != ():
        raise ValueError("sqrt_scalar: expected a 0-d tensor")
    if x.values < 0:
        raise ValueError("sqrt_scalar: negative input")
    out = np.sqrt(x.values)
    return _emit("sqrt_scalar", (x,), out, lambda g: (g / (2.0 * out),))


# ---------------------------------------------------------------------------
# linear algebra


def matmul(x: Tensor, w: Tensor) -> Tensor:
    xv, wv = _as2d(x, "matmul"), _as2d(w, "matmul")
    if xv.shape[1] != wv.shape[0]:
        raise ValueError(f"matmul: inner dims differ, {xv.shape} @ {wv.shape}")
    return _emit("matmul", (x, w), xv @ wv, lambda g: (g @ wv.T, xv.T @ g))


def linear(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    xv, wv = _as2d(x, "linear"), _as2d(w, "linear")
    bv = b.values
    if bv.ndim != 1:
        raise ValueError(f"linear: bias must be 1-d, got shape {bv.shape}")
    if xv.shape[1] != wv.shape[0] or wv.shape[1] != bv.shape[0]:
        raise ValueError(f"linear: shape mismatch x{xv.shape} w{wv.shape} b{bv.shape}")
    return _emit("linear", (x, w, b), xv @ wv + bv,
                 lambda g: (g @ wv.T, xv.T @ g, g.sum(axis=0)))


def row_sum(x: Tensor) -> Tensor:
    xv = _as2d(x, "row_sum")
    return _emit("row_sum", (x,), xv.sum(axis=1, keepdims=True),
                 lambda g: (np.broadcast_to(g, xv.shape),))


def mul_colvec(x: Tensor, v: Tensor) -> Tensor:
    """Scale row i of x by v[i, 0]."""
    xv, vv = _as2d(x, "mul_colvec"), _as2d(v, "mul_colvec")
    if vv.shape != (xv.shape[0], 1):
        raise ValueError(f"mul_colvec: expected column vector ({xv.shape[0]}, 1), got {vv.shape}")
    return _emit("mul_colvec", (x, v), xv * vv,
                 lambda g: (g * vv, (g * xv).sum(axis=1, keepdims=True)))


def concat_features(a: Tensor, b: Tensor) -> Tensor:
    av, bv = _as2d(a, "concat_features"), _as2d(b, "concat_features")
    if av.shape[0] != bv.shape[0]:
        raise ValueError(f"concat_features: row counts differ, {av.shape} vs {bv.shape}")
    w = av.shape[1]
    return _emit("concat_features", (a, b), np.concatenate([av, bv], axis=1),
                 lambda g: (g[:, :w], g[:, w:]))


def slice_cols(x: Tensor, start: int, stop: int) -> Tensor:
    xv = _as2d(x, "slice_cols")
    if not (0 <= start <= stop <= xv.shape[1]):
        raise ValueError(f"slice_cols: bad range [{start}:{stop}] for width {xv.shape[1]}")

    def pull(g):
        gx = np.zeros_like(xv)
        gx[:, start:stop] = g
        return (gx,)

    return _emit("slice_cols", (x,), xv[:, start:stop].copy(), pull)


# ---------------------------------------------------------------------------
# graph aggregation


def _edge_array(edges, n: int) -> np.ndarray:
    e = np.asarray(edges, dtype=np.int64)
    if e.size == 0:
        return e.reshape(0, 2)
    if e.ndim != 2 or e.shape[1] != 2:
        raise ValueError(f"edges must be an (E, 2) index array, got shape {e.shape}")
    if e.min() < 0 or e.max() >= n:
        raise ValueError(f"edge endpoint out of range for {n} nodes")
    return e


def neighbor_sum(x: Tensor, edges) -> Tensor:
    """out[v] = sum of x[u] over directed edges (u, v). No edges -> zeros.

    Accumulates in float64 whatever the working dtype: the edge order (and
    with it the summation order) varies with node numbering, and a wide
    accumulator keeps single-precision results independent of it.
    """
    xv = _as2d(x, "neighbor_sum")
    e = _edge_array(edges, xv.shape[0])
    src, dst = e[:, 0], e[:, 1]
    acc = np.zeros(xv.shape, dtype=np.float64)
    np.add.at(acc, dst, xv[src].astype(np.float64))
    out = acc.astype(xv.dtype)

    def pull(g):
        gx = np.zeros_like(xv)
        np.add.at(gx, src, g[dst])
        return (gx,)

    return _emit("neighbor_sum", (x,), out, pull)


def segment_sum(x: Tensor, segment_ids, num_segments: int) -> Tensor:
    """out[s] = sum of rows of x whose segment id is s."""
    xv = _as2d(x, "segment_sum")
    seg = np.asarray(segment_ids, dtype=np.int64)
    if seg.shape != (xv.shape[0],):
        raise ValueError(f"segment_sum: ids shape {seg.shape} does not match {xv.shape[0]} rows")
    if seg.size and (seg.min() < 0 or seg.max() >= num_segments):
        raise ValueError(f"segment id out of range for {num_segments} segments")
    # wide accumulator for the same reason as neighbor_sum: row order must
    # not leak into single-precision sums
    acc = np.zeros((num_segments, xv.shape[1]), dtype=np.float64)
    np.add.at(acc, seg, xv.astype(np.float64))
    out = acc.astype(xv.dtype)
    return _emit("segment_sum", (x,), out, lambda g: (g[seg],))


def gather_rows(x: Tensor, row_ids) -> Tensor:
    """out[i] = x[row_ids[i]]; backward scatter-adds."""
    xv = _as2d(x, "gather_rows")
    idx = np.asarray(row_ids, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError("gather_rows: row_ids must be 1-d")
    if idx.size and (idx.min() < 0 or idx.max() >= xv.shape[0]):
        raise ValueError(f"row id out of range for {xv.shape[0]} rows")

    def pull(g):
        gx = np.zeros_like(xv)
        np.add.at(gx, idx, g)
        return (gx,)

    return _emit("gather_rows", (x,), xv[idx], pull)


# ---------------------------------------------------------------------------
# softmax family


def softmax_rows(x: Tensor) -> Tensor:
    xv = _as2d(x, "softmax_rows")
    z = np.exp(xv - xv.max(axis=1, keepdims=True))
    out = z / z.sum(axis=1, keepdims=True)

    def pull(g):
        return (out * (g - (g * out).sum(axis=1, keepdims=True)),)

    return _emit("softmax_rows", (x,), out, pull)


def softmax_cross_entropy(logits: Tensor, targets) -> Tensor:
    """Summed (not averaged) cross entropy of softmax(logits) vs integer targets."""
    lv = _as2d(logits, "softmax_cross_entropy")
    t = np.asarray(targets, dtype=np.int64)
    n, c = lv.shape
    if t.shape != (n,):
        raise ValueError(f"targets shape {t.shape} does not match {n} rows")
    if t.size and (t.min() < 0 or t.max() >= c):
        raise ValueError(f"target class out of range for {c} classes")
    m = lv.max(axis=1, keepdims=True)
    z = lv - m
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True)) + m
    loss = np.asarray((lse[:, 0] - lv[np.arange(n), t]).sum(), dtype=lv.dtype)
    probs = np.exp(lv - lse)

    def pull(g):
        gl = probs.copy()
        gl[np.arange(n), t] -= 1.0
        return (gl * g,)

    return _emit("softmax_cross_entropy", (logits,), loss, pull)


# ---------------------------------------------------------------------------
# batch norm and dropout


@dataclass
class BatchNormState:
    """Learnable scale/shift plus running statistics for one feature axis."""

    gamma: Tensor
    beta: Tensor
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5

    @classmethod
    def create(cls, dim: int, dtype=np.float64) -> "BatchNormState":
        return cls(
            gamma=Tensor(np.ones(dim, dtype=dtype), requires_grad=True),
            beta=Tensor(np.zeros(dim, dtype=dtype), requires_grad=True),
            running_mean=np.zeros(dim, dtype=dtype),
            running_var=np.ones(dim, dtype=dtype),
        )


def _check_mode(mode: str):
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")


def batch_norm(x: Tensor, state: BatchNormState, mode: str) -> Tensor:
    _check_mode(mode)
    xv = _as2d(x, "batch_norm")
    gamma, beta = state.gamma, state.beta
    if xv.shape[1] != gamma.values.shape[0]:
        raise ValueError(f"batch_norm: width {xv.shape[1]} does not match state dim "
                         f"{gamma.values.shape[0]}")
    if mode == "train":
        if xv.shape[0] < 2:
            raise ValueError("batch_norm: train mode needs at least 2 rows")
        mu = xv.mean(axis=0)
        var = xv.var(axis=0)  # biased, matches the normalization below
        m = state.momentum
        state.running_mean = ((1.0 - m) * state.running_mean + m * mu).astype(xv.dtype)
        state.running_var = ((1.0 - m) * state.running_var + m * var).astype(xv.dtype)
    else:
        mu = state.running_mean
        var = state.running_var
    inv = 1.0 / np.sqrt(var + state.eps)
    xhat = (xv - mu) * inv
    out = xhat * gamma.values + beta.values

    if mode == "train":
        def pull(g):
            n = xv.shape[0]
            dxhat = g * gamma.values
            dx = (inv / n) * (n * dxhat - dxhat.sum(axis=0)
                              - xhat * (dxhat * xhat).sum(axis=0))
            return (dx, (g * xhat).sum(axis=0), g.sum(axis=0))
    else:
        def pull(g):
            return (g * gamma.values * inv, (g * xhat).sum(axis=0), g.sum(axis=0))

    return _emit("batch_norm", (x, gamma, beta), out, pull)


def dropout(x: Tensor, p: float, mode: str, rng: np.random.Generator | None = None) -> Tensor:
    _check_mode(mode)
    if not (0.0 <= p < 1.0):
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    if mode == "eval" or p == 0.0:
        return x
    if rng is None:
        raise ValueError("train-mode dropout needs an rng")
    keep = rng.random(x.values.shape) >= p
    s = 1.0 / (1.0 - p)
    out = np.where(keep, x.values * s, 0)
    return _emit("dropout", (x,), out.astype(x.values.dtype, copy=False),
                 lambda g: (np.where(keep, g * s, 0),))
