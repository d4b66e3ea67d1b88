"""A single LSTM cell with fused gate weights."""
from typing import Tuple

import numpy as np

from ..autodiff import Tensor, affine, concat, narrow, sigmoid, tanh
from .block import Block, uniform_init


class LstmCell(Block):
    """
    LSTM cell whose four gates share one ``4H × (in + H)`` weight.

    Gate rows are ordered input, forget, cell candidate, output.
    """

    def __init__(self, input_dim: int, rng: np.random.Generator, hidden_dim: int = 256):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        fan_in = input_dim + hidden_dim
        self.weight = uniform_init(rng, (4 * hidden_dim, fan_in), fan_in)
        self.bias = uniform_init(rng, (4 * hidden_dim,), fan_in)

    def zero_state(self) -> Tuple[Tensor, Tensor]:
        return Tensor(np.zeros(self.hidden_dim)), Tensor(np.zeros(self.hidden_dim))

    def __call__(self, x: Tensor, h: Tensor, c: Tensor) -> Tuple[Tensor, Tensor]:
        return lstm_step(self, x, h, c)

    def flops(self) -> int:
        H = self.hidden_dim
        return 8 * (self.input_dim + H) * H + 24 * H


def lstm_step(cell: LstmCell, x: Tensor, h_prev: Tensor, c_prev: Tensor) -> Tuple[Tensor, Tensor]:
    """One step of the LSTM recurrence, returning the new ``(h, c)``.

    Inputs are vectors, or matrices holding one row per sequence.
    """
    H = cell.hidden_dim
    z = affine(concat([x, h_prev], axis=-1), cell.weight, cell.bias)
    i = sigmoid(narrow(z, 0, H))
    f = sigmoid(narrow(z, H, 2 * H))
    g = tanh(narrow(z, 2 * H, 3 * H))
    o = sigmoid(narrow(z, 3 * H, 4 * H))
    c = f * c_prev + i * g
    h = o * tanh(c)
    return h, c
