"""
Multi-head self-attention and the pre-norm transformer encoder stack.

All blocks operate on token matrices of shape ``N × dim``, or on a batch of them
``B × N × dim``. There is no masking.
"""
from typing import Optional

import numpy as np

from ..autodiff import Tensor, concat, matmul, narrow, relu, reshape, softmax, swapaxes, take
from .block import Block
from .layers import LayerNorm, Linear


class MultiHeadSelfAttention(Block):
    """
    Scaled dot-product self-attention over ``heads`` equal slices of ``dim``.

    The attention weights of the most recent forward pass are kept (as a plain
    ``heads × N × N`` array, with a leading batch axis for batched input) in
    :attr:`last_attention`.
    """

    def __init__(self, rng: np.random.Generator, dim: int = 256, heads: int = 4):
        if dim % heads:
            raise ValueError(f"model dim {dim} is not divisible by {heads} heads")
        self.dim = dim
        self.heads = heads
        self.query = Linear(dim, dim, rng)
        self.key = Linear(dim, dim, rng)
        self.value = Linear(dim, dim, rng)
        self.out = Linear(dim, dim, rng)
        self._last_attention: Optional[np.ndarray] = None

    @property
    def last_attention(self) -> Optional[np.ndarray]:
        return self._last_attention

    def __call__(self, x: Tensor) -> Tensor:
        return mhsa_forward(self, x)

    def flops(self, n_tokens: int) -> int:
        proj = 4 * self.query.flops(n_tokens)
        scores = 2 * n_tokens * n_tokens * self.dim
        mix = 2 * n_tokens * n_tokens * self.dim
        return proj + scores + mix + self.heads * n_tokens * n_tokens


def mhsa_forward(block: MultiHeadSelfAttention, x: Tensor) -> Tensor:
    if x.ndim not in (2, 3) or x.shape[-2] < 1:
        raise ValueError(
            f"self-attention expects an N x dim token matrix or a batch of them, got {x.shape}"
        )
    dh = block.dim // block.heads
    scale = 1.0 / np.sqrt(dh)
    q, k, v = block.query(x), block.key(x), block.value(x)

    outputs, weights = [], []
    for h in range(block.heads):
        lo, hi = h * dh, (h + 1) * dh
        qh, kh, vh = narrow(q, lo, hi), narrow(k, lo, hi), narrow(v, lo, hi)
        attn = softmax(matmul(qh, swapaxes(kh)) * scale, axis=-1)
        weights.append(attn.data)
        outputs.append(matmul(attn, vh))

    block._last_attention = np.stack(weights, axis=-3)
    return block.out(concat(outputs, axis=-1))


class EncoderBlock(Block):
    """Pre-norm encoder block: ``x + MHSA(LN(x))`` then ``x + FF(LN(x))``."""

    def __init__(
        self, rng: np.random.Generator, dim: int = 256, heads: int = 4, ff_dim: int = 512
    ):
        self.dim = dim
        self.ff_dim = ff_dim
        self.norm1 = LayerNorm(dim)
        self.attention = MultiHeadSelfAttention(rng, dim, heads)
        self.norm2 = LayerNorm(dim)
        self.ff1 = Linear(dim, ff_dim, rng)
        self.ff2 = Linear(ff_dim, dim, rng)

    def __call__(self, x: Tensor) -> Tensor:
        x = x + self.attention(self.norm1(x))
        return x + self.ff2(relu(self.ff1(self.norm2(x))))

    def flops(self, n_tokens: int) -> int:
        return (
            self.norm1.flops(n_tokens)
            + self.attention.flops(n_tokens)
            + self.norm2.flops(n_tokens)
            + self.ff1.flops(n_tokens)
            + self.ff_dim * n_tokens
            + self.ff2.flops(n_tokens)
            + 2 * self.dim * n_tokens
        )


class TransformerEncoder(Block):
    """
    A stack of encoder blocks with optional learned position embeddings.

    Parameters
    ----------
    rng
        Generator used for initialisation.
    dim, heads, layers, ff_dim
        Width, attention heads, number of blocks and feed-forward width.
    max_tokens
        Rows of the position table; tokens are indexed by their ordinal.
    position_embedding
        Whether the position table is added to the input tokens. With it off the
        encoder is permutation-equivariant over tokens.
    """

    def __init__(
        self,
        rng: np.random.Generator,
        dim: int = 256,
        heads: int = 4,
        layers: int = 8,
        ff_dim: int = 512,
        max_tokens: int = 16,
        position_embedding: bool = True,
    ):
        self.dim = dim
        self.position_embedding = position_embedding
        self.positions = Tensor(rng.normal(0.0, 0.02, size=(max_tokens, dim)), requires_grad=True)
        self.blocks = [EncoderBlock(rng, dim, heads, ff_dim) for _ in range(layers)]
        self.norm = LayerNorm(dim)

    def __call__(self, x: Tensor) -> Tensor:
        return transformer_forward(self, x)

    def flops(self, n_tokens: int) -> int:
        pos = self.dim * n_tokens if self.position_embedding else 0
        return (
            pos
            + sum(blk.flops(n_tokens) for blk in self.blocks)
            + self.norm.flops(n_tokens)
        )


def transformer_forward(enc: TransformerEncoder, units: Tensor) -> Tensor:
    n_tokens = units.shape[-2] if units.ndim > 1 else 0
    if n_tokens < 1:
        raise ValueError("transformer needs at least one token")
    if enc.position_embedding:
        if n_tokens > enc.positions.shape[0]:
            raise ValueError(
                f"{n_tokens} tokens exceed the position table of {enc.positions.shape[0]}"
            )
        if units.ndim == 2:
            units = units + take(enc.positions, np.arange(n_tokens))
        else:
            batch = units.shape[0]
            pos = take(enc.positions, np.tile(np.arange(n_tokens), batch))
            units = units + reshape(pos, units.shape)
    for blk in enc.blocks:
        units = blk(units)
    return enc.norm(units)
