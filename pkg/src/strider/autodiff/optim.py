"""Adam, applied in place to named collections of tensors."""
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Sequence

import numpy as np

from .tensor import NonFiniteError, ShapeError, Tensor


@dataclass
class AdamState:
    """First/second moment estimates and the step counter of one optimizer."""

    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)
    step: int = 0

    @classmethod
    def zeros_like(cls, params: Sequence[Tensor]) -> "AdamState":
        return cls(
            m=[np.zeros_like(p.data) for p in params],
            v=[np.zeros_like(p.data) for p in params],
        )


def adam_update(
    params: Sequence[Tensor],
    grads: Sequence[np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """
    Apply one bias-corrected Adam step to ``params`` in place.

    Parameters
    ----------
    params
        Tensors to update. Their ``data`` arrays are modified in place.
    grads
        Gradients, one per parameter, of matching shape. ``None`` counts as zero.
    state
        Moment estimates, updated in place.
    lr
        Learning rate.

    Raises
    ------
    ShapeError
        If parameters, gradients and state do not line up.
    NonFiniteError
        If any parameter is non-finite after the step.
    """
    if not (len(params) == len(grads) == len(state.m) == len(state.v)):
        raise ShapeError(
            f"adam_update: {len(params)} params, {len(grads)} grads, {len(state.m)} moments"
        )

    grads = [np.zeros_like(p.data) if g is None else g for p, g in zip(params, grads)]
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if not (p.shape == np.shape(g) == m.shape == v.shape):
            raise ShapeError(f"adam_update: shape mismatch for parameter {p.name or p.shape}")

    state.step += 1
    bc1 = 1.0 - beta1**state.step
    bc2 = 1.0 - beta2**state.step

    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)

        if not np.all(np.isfinite(p.data)):
            raise NonFiniteError(
                f"parameter {p.name or p.shape} became non-finite after optimizer step "
                f"{state.step} (lr={lr})"
            )


class Adam:
    """An Adam optimizer over a fixed, named set of parameters.

    Parameters
    ----------
    params
        Mapping of name to parameter tensor (as returned by
        :meth:`strider.nn.Block.named_parameters`).
    lr
        Learning rate.
    """

    def __init__(
        self,
        params: Mapping[str, Tensor],
        lr: float,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.names = list(params)
        self.params = [params[k] for k in self.names]
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = AdamState.zeros_like(self.params)

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        adam_update(
            self.params,
            [p.grad for p in self.params],
            self.state,
            self.lr,
            self.beta1,
            self.beta2,
            self.eps,
        )

    @property
    def param_dict(self) -> Dict[str, Tensor]:
        return dict(zip(self.names, self.params))
