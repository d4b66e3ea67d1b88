"""Central finite-difference verification of tape gradients."""
from typing import Callable, Optional, Sequence

import numpy as np

from .tensor import Tape, Tensor, backward, no_grad


def check_gradients(
    fnc: Callable[[], Tensor],
    inputs: Sequence[Tensor],
    h: float = 1e-5,
    n_samples: Optional[int] = None,
    seed: int = 0,
) -> float:
    """
    Compare tape gradients of a scalar function with central differences.

    Parameters
    ----------
    fnc
        Zero-argument callable building a scalar :class:`Tensor` from ``inputs`` (and
        anything else it closes over). It is evaluated once on a tape and then
        repeatedly without one.
    inputs
        Tensors to differentiate with respect to. They must have ``requires_grad``.
    h
        Finite-difference step.
    n_samples
        If given, only this many randomly chosen coordinates per input are checked.
    seed
        Seed for choosing the checked coordinates.

    Returns
    -------
    float
        The largest relative error ``|a - n| / max(|a|, |n|, 1e-6)`` over all inputs,
        with ``a`` the analytic and ``n`` the numeric gradient restricted to the
        checked coordinates.
    """
    for x in inputs:
        x.grad = None
    with Tape() as tape:
        loss = fnc()
    backward(loss, tape)

    rng = np.random.default_rng(seed)
    worst = 0.0
    for x in inputs:
        analytic = np.zeros_like(x.data) if x.grad is None else x.grad.copy()
        flat = x.data.reshape(-1)
        idx = np.arange(flat.size)
        if n_samples is not None and n_samples < flat.size:
            idx = rng.choice(flat.size, size=n_samples, replace=False)

        numeric = np.zeros(len(idx))
        with no_grad():
            for j, i in enumerate(idx):
                orig = flat[i]
                flat[i] = orig + h
                up = fnc().item()
                flat[i] = orig - h
                down = fnc().item()
                flat[i] = orig
                numeric[j] = (up - down) / (2 * h)

        a = analytic.reshape(-1)[idx]
        err = np.linalg.norm(a - numeric) / max(
            np.linalg.norm(a), np.linalg.norm(numeric), 1e-6
        )
        worst = max(worst, float(err))
    return worst
