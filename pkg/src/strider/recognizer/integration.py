"""
Multi-unit integration and the video-level classifier.

An :class:`Integrator` maps the ``N`` unit embeddings of a video to one global
representation; the :class:`Classifier` maps that to class probabilities. The same
pair produces the final prediction and the per-step intermediate predictions used
for rewards, through :func:`predict_proba`.
"""
from typing import Optional, Sequence, Union

import numpy as np

from .._internals import Component, pluggable
from ..autodiff import ShapeError, Tensor, mean, reshape, softmax, stack, tmax
from ..metrics.cost import RunTrace
from ..nn import MLP, Block, Linear, TransformerEncoder

Units = Union[Sequence[Tensor], Tensor]


@pluggable
class Integrator(Component, Block):
    """
    Base class of multi-unit integration modules.

    Parameters
    ----------
    unit_dim
        Width of each unit embedding.
    n_units
        Number of units (locators) integrated per video.
    rng
        Generator for parameter initialisation.
    """

    def __init__(
        self, unit_dim: int, n_units: int, rng: Optional[np.random.Generator] = None, **model_params
    ):
        super().__init__(**model_params)
        self.unit_dim = unit_dim
        self.n_units = n_units

    @property
    def output_dim(self) -> int:
        raise NotImplementedError()

    def _integrate(self, tokens: Tensor) -> Tensor:
        raise NotImplementedError()

    def __call__(self, units: Units) -> Tensor:
        """
        Integrate the units of one video, given as a list of ``(unit_dim,)`` tensors,
        or of a batch of videos, given as one ``(B, N, unit_dim)`` tensor.
        """
        if isinstance(units, Tensor):
            if units.ndim != 3 or units.shape[-1] != self.unit_dim:
                raise ShapeError(
                    f"unit batch of shape {units.shape}, expected (B, N, {self.unit_dim})"
                )
            if units.shape[1] < 1:
                raise ValueError("integration needs at least one unit")
            return self._integrate(units)
        if len(units) < 1:
            raise ValueError("integration needs at least one unit")
        widths = {u.shape for u in units}
        if widths != {(self.unit_dim,)}:
            raise ShapeError(f"unit shapes {sorted(widths)} do not all equal ({self.unit_dim},)")
        return self._integrate(stack(units))

    def flops(self) -> int:
        raise NotImplementedError()


class MeanPool(Integrator):
    @property
    def output_dim(self):
        return self.unit_dim

    def _integrate(self, tokens):
        return mean(tokens, axis=-2)

    def flops(self):
        return self.n_units * self.unit_dim


class MaxPool(Integrator):
    @property
    def output_dim(self):
        return self.unit_dim

    def _integrate(self, tokens):
        return tmax(tokens, axis=-2)

    def flops(self):
        return self.n_units * self.unit_dim


class Forward(Integrator):
    """A two-layer fully-connected network over the concatenated units."""

    _defaults = {"hidden_dim": 512}

    def __init__(self, unit_dim, n_units, rng=None, **model_params):
        super().__init__(unit_dim, n_units, rng, **model_params)
        rng = rng if rng is not None else np.random.default_rng(0)
        h = self.params["hidden_dim"]
        self.mlp = MLP([n_units * unit_dim, h, h], rng)

    @property
    def output_dim(self):
        return self.params["hidden_dim"]

    def _integrate(self, tokens):
        n = tokens.shape[-2]
        if n != self.n_units:
            raise ShapeError(f"Forward integrator built for {self.n_units} units, got {n}")
        return self.mlp(reshape(tokens, tokens.shape[:-2] + (n * self.unit_dim,)))

    def flops(self):
        return self.mlp.flops()


class Transformer(Integrator):
    """
    A transformer encoder over the unit tokens, mean-pooled to one vector.

    Units are projected to ``dim`` first when their width differs. Position
    embeddings are indexed by locator ordinal.
    """

    _defaults = {
        "dim": 256,
        "heads": 4,
        "layers": 8,
        "ff_dim": 512,
        "position_embedding": True,
    }

    def __init__(self, unit_dim, n_units, rng=None, **model_params):
        super().__init__(unit_dim, n_units, rng, **model_params)
        rng = rng if rng is not None else np.random.default_rng(0)
        p = self.params
        self.project = Linear(unit_dim, p["dim"], rng) if unit_dim != p["dim"] else None
        self.encoder = TransformerEncoder(
            rng,
            dim=p["dim"],
            heads=p["heads"],
            layers=p["layers"],
            ff_dim=p["ff_dim"],
            max_tokens=n_units,
            position_embedding=p["position_embedding"],
        )

    @property
    def output_dim(self):
        return self.params["dim"]

    def _integrate(self, tokens):
        if self.project is not None:
            tokens = self.project(tokens)
        return mean(self.encoder(tokens), axis=-2)

    def flops(self):
        n = self.n_units
        proj = self.project.flops(n) if self.project is not None else 0
        return proj + self.encoder.flops(n) + n * self.params["dim"]


class Classifier(Block):
    """A linear head producing ``n_classes`` logits, for one representation or a batch."""

    def __init__(self, in_dim: int, n_classes: int, rng: np.random.Generator):
        self.n_classes = n_classes
        self.head = Linear(in_dim, n_classes, rng)

    def __call__(self, g: Tensor) -> Tensor:
        if g.ndim not in (1, 2) or g.shape[-1] != self.head.in_dim:
            raise ShapeError(f"classifier expects (..., {self.head.in_dim}), got {g.shape}")
        return self.head(g)

    def flops(self) -> int:
        # Softmax counted at one FLOP per class.
        return self.head.flops() + self.n_classes


def integrate(intg: Integrator, units: Units) -> Tensor:
    return intg(units)


def classify(cls: Classifier, g: Tensor) -> Tensor:
    """Class probabilities for the global representation ``g``."""
    return softmax(cls(g))


def predict_logits(intg: Integrator, cls: Classifier, units: Units) -> Tensor:
    return cls(intg(units))


def predict_proba(
    intg: Integrator, cls: Classifier, units: Units, trace: Optional[RunTrace] = None
) -> Tensor:
    """Integrate and classify. The one path for both final and intermediate predictions.

    A ``(B, N, unit_dim)`` batch of units gives ``(B, n_classes)`` probabilities and is
    charged as ``B`` integrations.
    """
    out = softmax(predict_logits(intg, cls, units))
    if trace is not None:
        trace.charge_integration(out.shape[0] if out.ndim == 2 else 1)
    return out


def intermediate_predict(states, intg: Integrator, cls: Classifier) -> Tensor:
    """Class probabilities from the current contexts of all locators.

    Stopped locators contribute their frozen unit embedding.
    """
    if any(s.n_selected < 1 for s in states):
        raise ValueError("every locator must have observed a frame")
    return predict_proba(intg, cls, [s.hidden for s in states])
