"""Central-difference gradient verification for the tape engine."""
from __future__ import annotations

from typing import Callable, Iterable

import numpy as np

from .autodiff import Tape, Tensor, backward


def finite_difference_check(f: Callable[[], Tensor], params: Iterable[Tensor],
                            h: float = 1e-5) -> float:
    """Max relative error between reverse-mode and numeric gradients.

    f is a zero-argument callable returning a scalar Tensor; it is run once
    under a fresh tape for the analytic gradients and then twice per
    parameter coordinate (untaped) for central differences. Parameters are
    perturbed in place and restored. f must be value-deterministic across
    calls: no live dropout, no data-order changes. Relative error uses
    max(|analytic|, |numeric|, 1e-8) as the denominator.
    """
    params = list(params)
    with Tape() as tape:
        loss = f()
    if loss.values.shape != ():
        raise ValueError("f must return a scalar tensor")
    grads = backward(tape, loss)

    worst = 0.0
    for p in params:
        analytic = np.asarray(grads.of(p)).reshape(-1)
        flat = p.values.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f().values)
            flat[i] = orig - h
            fm = float(f().values)
            flat[i] = orig
            numeric = (fp - fm) / (2.0 * h)
            ana = float(analytic[i])
            denom = max(abs(ana), abs(numeric), 1e-8)
            err = abs(ana - numeric) / denom
            if err > worst:
                worst = err
    return worst
