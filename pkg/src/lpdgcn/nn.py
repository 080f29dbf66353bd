"""Two-layer MLP blocks, parameter init, and JSON checkpoints."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .autodiff import BatchNormState, Tensor, batch_norm, linear, matmul, relu


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   dtype=np.float64) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out)).astype(dtype)


@dataclass
class MlpParams:
    """linear -> ReLU -> linear, optionally followed by batch norm + ReLU.

    BN-capped blocks carry no second bias: train-mode normalization
    subtracts any constant column shift exactly, so such a bias would stay
    at zero with a zero gradient forever."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor | None
    bn: BatchNormState | None = None


def make_mlp(seed: int, in_dim: int, hidden_dim: int, out_dim: int,
             with_bn: bool, dtype=np.float64) -> MlpParams:
    rng = np.random.default_rng(seed)
    return MlpParams(
        w1=Tensor(glorot_uniform(rng, in_dim, hidden_dim, dtype), requires_grad=True),
        b1=Tensor(np.zeros(hidden_dim, dtype=dtype), requires_grad=True),
        w2=Tensor(glorot_uniform(rng, hidden_dim, out_dim, dtype), requires_grad=True),
        b2=None if with_bn else Tensor(np.zeros(out_dim, dtype=dtype),
                                       requires_grad=True),
        bn=BatchNormState.create(out_dim, dtype) if with_bn else None,
    )


def mlp_forward(p: MlpParams, x: Tensor, mode: str = "eval") -> Tensor:
    h = relu(linear(x, p.w1, p.b1))
    y = matmul(h, p.w2) if p.b2 is None else linear(h, p.w2, p.b2)
    if p.bn is not None:
        y = relu(batch_norm(y, p.bn, mode))
    return y


def mlp_named_params(prefix: str, p: MlpParams) -> list:
    out = [(f"{prefix}.w1", p.w1), (f"{prefix}.b1", p.b1), (f"{prefix}.w2", p.w2)]
    if p.b2 is not None:
        out.append((f"{prefix}.b2", p.b2))
    if p.bn is not None:
        out += [(f"{prefix}.bn.gamma", p.bn.gamma), (f"{prefix}.bn.beta", p.bn.beta)]
    return out


def mlp_named_state(prefix: str, p: MlpParams) -> list:
    """Non-learnable arrays a checkpoint must also carry."""
    if p.bn is None:
        return []
    return [(f"{prefix}.bn.running_mean", p.bn.running_mean),
            (f"{prefix}.bn.running_var", p.bn.running_var)]


# ---------------------------------------------------------------------------
# checkpoints

def save_checkpoint(path: str, named_params: list, named_state: list):
    """Flat name -> {shape, values} JSON. float64 entries round-trip
    bit-exactly (repr serialization); float32 entries value-exactly."""
    obj = {}
    for name, item in list(named_params) + list(named_state):
        arr = item.values if isinstance(item, Tensor) else np.asarray(item)
        obj[name] = {"shape": list(arr.shape),
                     "values": [float(v) for v in arr.reshape(-1)]}
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True)


def load_checkpoint(path: str, named_params: list, named_state: list):
    """Assign saved arrays onto existing parameter objects, by name."""
    with open(path) as fh:
        obj = json.load(fh)
    targets = list(named_params) + list(named_state)
    names = [name for name, _ in targets]
    if sorted(names) != sorted(obj.keys()):
        missing = sorted(set(names) - set(obj)) + sorted(set(obj) - set(names))
        raise ValueError(f"checkpoint does not match model parameters: {missing}")
    holders = dict(targets)
    for name, entry in obj.items():
        item = holders[name]
        arr = item.values if isinstance(item, Tensor) else item
        loaded = np.asarray(entry["values"], dtype=arr.dtype).reshape(entry["shape"])
        if loaded.shape != arr.shape:
            raise ValueError(f"{name}: checkpoint shape {loaded.shape} vs model {arr.shape}")
        arr[...] = loaded
