"""Temporal networks turning a locator's observed frames into a running context."""
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .._internals import Component, pluggable
from ..autodiff import Tensor, maximum, where
from ..nn import Block, LstmCell, lstm_step


@dataclass
class TemporalState:
    """Running state of one locator's temporal network, or of a batch of locators
    stacked as rows.

    ``context`` is the emitted context ``h``; ``cell`` is the LSTM cell state, or the
    running sum of the mean pool; ``seen`` counts the embeddings observed so far
    (one count per row when batched).
    """

    context: Tensor
    cell: Optional[Tensor] = None
    seen: Union[int, np.ndarray] = 0


def _zeros(dim: int, batch: Optional[int]) -> Tensor:
    return Tensor(np.zeros(dim if batch is None else (batch, dim)))


def select_state(mask: np.ndarray, new: TemporalState, old: TemporalState) -> TemporalState:
    """Rows of ``new`` where ``mask`` holds and rows of ``old`` elsewhere."""
    cell = None if new.cell is None else where(mask, new.cell, old.cell)
    return TemporalState(
        where(mask, new.context, old.context), cell, np.where(mask, new.seen, old.seen)
    )


@pluggable
class TemporalNet(Component, Block):
    """Base class of temporal networks. One instance is shared by all locators.

    :meth:`step` accepts one embedding ``(input_dim,)`` or a batch of them
    ``(B, input_dim)`` together with a state of matching batch shape.
    """

    def __init__(self, input_dim: int, rng: Optional[np.random.Generator] = None, **model_params):
        super().__init__(**model_params)
        self.input_dim = input_dim

    @property
    def output_dim(self) -> int:
        raise NotImplementedError()

    def initial_state(self, batch: Optional[int] = None) -> TemporalState:
        seen = 0 if batch is None else np.zeros(batch, dtype=int)
        return TemporalState(_zeros(self.output_dim, batch), seen=seen)

    def step(self, x: Tensor, state: TemporalState) -> TemporalState:
        raise NotImplementedError()

    def step_flops(self) -> int:
        raise NotImplementedError()


class LSTM(TemporalNet):
    _defaults = {"hidden_dim": 256}

    def __init__(self, input_dim, rng=None, **model_params):
        super().__init__(input_dim, rng, **model_params)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.cell = LstmCell(input_dim, rng, self.params["hidden_dim"])

    @property
    def output_dim(self):
        return self.params["hidden_dim"]

    def initial_state(self, batch=None):
        state = super().initial_state(batch)
        state.cell = _zeros(self.output_dim, batch)
        return state

    def step(self, x, state):
        h, c = lstm_step(self.cell, x, state.context, state.cell)
        return TemporalState(h, c, state.seen + 1)

    def step_flops(self):
        return self.cell.flops()


class _Pool(TemporalNet, abstract=True):
    """Pools every embedding observed so far; the context has the input width."""

    @property
    def output_dim(self):
        return self.input_dim

    def step_flops(self):
        return self.input_dim


class MeanPool(_Pool):
    def initial_state(self, batch=None):
        state = super().initial_state(batch)
        state.cell = _zeros(self.output_dim, batch)
        return state

    def step(self, x, state):
        total = state.cell + x
        seen = state.seen + 1
        if np.ndim(seen) == 0:
            return TemporalState(total * (1.0 / seen), total, seen)
        scale = np.broadcast_to((1.0 / seen)[:, None], total.shape)
        return TemporalState(total * Tensor(scale), total, seen)


class MaxPool(_Pool):
    def step(self, x, state):
        first = np.asarray(state.seen) == 0
        if first.ndim == 0:
            context = x if first else maximum(state.context, x)
        else:
            context = where(first, x, maximum(state.context, x))
        return TemporalState(context, seen=state.seen + 1)


class SumPool(_Pool):
    def step(self, x, state):
        return TemporalState(state.context + x, seen=state.seen + 1)
