"""
Spatial encoders: the per-frame embedding shared by every locator.

The default :class:`Passthrough` treats the stored frame features as already
embedded (the precomputed-feature regime) and declares a calibrated backbone cost
per frame; :class:`MlpEmbedder` is a small trainable embedder whose cost is its own
analytic count.
"""
from typing import Optional

import numpy as np

from .._internals import Component, pluggable
from ..autodiff import ShapeError, Tensor
from ..metrics.cost import RunTrace
from ..nn import MLP, Block

#: FLOPs per frame charged by :class:`Passthrough`, standing in for a ResNet-50-sized
#: backbone. Calibrated so 8.52 mean frames per video model 38.7 GFLOPs.
BACKBONE_FLOPS_PER_FRAME = 4.54e9


@pluggable
class SpatialEncoder(Component, Block):
    """
    Base class of frame encoders.

    Parameters
    ----------
    input_dim
        Width of the raw frame features.
    rng
        Generator for parameter initialisation (unused by parameter-free encoders).
    model_params
        Values for the model's ``_defaults``.
    """

    def __init__(self, input_dim: int, rng: Optional[np.random.Generator] = None, **model_params):
        super().__init__(**model_params)
        self.input_dim = input_dim

    @property
    def output_dim(self) -> int:
        raise NotImplementedError()

    def _embed(self, frame: Tensor) -> Tensor:
        raise NotImplementedError()

    def __call__(self, frame: Tensor) -> Tensor:
        if frame.ndim not in (1, 2) or frame.shape[-1] != self.input_dim:
            raise ShapeError(
                f"frame of shape {frame.shape}, encoder expects (..., {self.input_dim})"
            )
        return self._embed(frame)

    def declared_cost(self) -> float:
        """FLOPs charged for every encoded frame."""
        raise NotImplementedError()


class Passthrough(SpatialEncoder):
    """The identity encoder with a declared, constant backbone cost."""

    _defaults = {"cost_per_frame": BACKBONE_FLOPS_PER_FRAME}

    @property
    def output_dim(self) -> int:
        return self.input_dim

    def _embed(self, frame):
        return frame

    def declared_cost(self) -> float:
        return float(self.params["cost_per_frame"])


class MlpEmbedder(SpatialEncoder):
    """A trainable two-layer embedder ``input_dim → hidden_dim → output_dim``."""

    _defaults = {"hidden_dim": 512, "output_dim": 1024}

    def __init__(self, input_dim, rng=None, **model_params):
        super().__init__(input_dim, rng, **model_params)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.mlp = MLP([input_dim, self.params["hidden_dim"], self.params["output_dim"]], rng)

    @property
    def output_dim(self) -> int:
        return self.params["output_dim"]

    def _embed(self, frame):
        return self.mlp(frame)

    def declared_cost(self) -> float:
        return float(sum(lyr.flops() for lyr in self.mlp.layers))


def encode_frame(enc: SpatialEncoder, frame: Tensor, trace: Optional[RunTrace] = None) -> Tensor:
    """Embed one frame, charging exactly one frame at the encoder's declared cost."""
    out = enc(frame)
    if trace is not None:
        trace.charge_frame(enc.declared_cost())
    return out


def declared_cost(enc: SpatialEncoder) -> float:
    return enc.declared_cost()


def encode_frames(
    enc: SpatialEncoder, frames: Tensor, charged: np.ndarray, trace: Optional[RunTrace] = None
) -> Tensor:
    """Embed a ``(B, input_dim)`` batch of frames, charging only the rows flagged in
    ``charged``.
    """
    out = enc(frames)
    if trace is not None:
        trace.charge_frame(enc.declared_cost(), int(np.count_nonzero(charged)))
    return out
