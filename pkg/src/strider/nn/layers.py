"""Linear layers, multi-layer perceptrons and layer normalisation."""
from typing import Sequence

import numpy as np

from ..autodiff import Tensor, affine, layer_norm, relu, tanh
from .block import Block, uniform_init

_ACTIVATIONS = {"relu": relu, "tanh": tanh}


class Linear(Block):
    """``y = W x + b`` with ``W`` of shape ``out × in``."""

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.weight = uniform_init(rng, (out_dim, in_dim), in_dim)
        self.bias = uniform_init(rng, (out_dim,), in_dim)

    def __call__(self, x: Tensor) -> Tensor:
        return linear_forward(self, x)

    def flops(self, n_rows: int = 1) -> int:
        return 2 * self.in_dim * self.out_dim * n_rows


def linear_forward(layer: Linear, x: Tensor) -> Tensor:
    return affine(x, layer.weight, layer.bias)


class MLP(Block):
    """
    A stack of linear layers with an activation between consecutive layers.

    Parameters
    ----------
    dims
        Layer widths, input first. ``dims=[64, 512, 512, 4]`` is three linear layers.
    rng
        Generator used for initialisation.
    activation
        Either "relu" or "tanh". No activation follows the final layer.
    """

    def __init__(self, dims: Sequence[int], rng: np.random.Generator, activation: str = "relu"):
        if len(dims) < 2:
            raise ValueError("an MLP needs at least an input and an output width")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"activation must be one of {tuple(_ACTIVATIONS)}")
        self.dims = list(dims)
        self.activation = activation
        self.layers = [Linear(a, b, rng) for a, b in zip(dims[:-1], dims[1:])]

    @property
    def in_dim(self) -> int:
        return self.dims[0]

    @property
    def out_dim(self) -> int:
        return self.dims[-1]

    def __call__(self, x: Tensor) -> Tensor:
        return mlp_forward(self.layers, self.activation, x)

    def flops(self, n_rows: int = 1) -> int:
        hidden = sum(self.dims[1:-1])
        return sum(lyr.flops(n_rows) for lyr in self.layers) + hidden * n_rows


def mlp_forward(layers: Sequence[Linear], activation: str, x: Tensor) -> Tensor:
    act = _ACTIVATIONS[activation]
    for i, layer in enumerate(layers):
        x = linear_forward(layer, x)
        if i < len(layers) - 1:
            x = act(x)
    return x


class LayerNorm(Block):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.dim = dim
        self.eps = eps
        self.gain = Tensor(np.ones(dim), requires_grad=True)
        self.bias = Tensor(np.zeros(dim), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gain, self.bias, self.eps)

    def flops(self, n_rows: int = 1) -> int:
        return 5 * self.dim * n_rows
