"""The bundle of networks making up one hierarchical recognizer."""
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import Tensor
from ..data import VideoSample
from ..metrics.cost import CostModel, RunTrace
from ..nn import MLP, Block, checksum_of
from .batch import run_batch
from .integration import Classifier, Integrator, predict_proba
from .locator import ActionSpace, Episode, run_episode
from .spatial import Passthrough, SpatialEncoder
from .temporal import TemporalNet

BACKBONE = ("spatial", "temporal", "integrator", "classifier")


class RecognitionModel(Block):
    """
    Shared spatial encoder, shared temporal network, one policy per locator, the
    integrator and the classifier.

    The backbone (spatial, temporal, integrator, classifier) and the policies are
    trained in different stages; :meth:`backbone_parameters` and
    :meth:`policy_parameters` give the two disjoint parameter sets.
    """

    def __init__(
        self,
        spatial: SpatialEncoder,
        temporal: TemporalNet,
        policies: List[MLP],
        integrator: Integrator,
        classifier: Classifier,
        action_space: ActionSpace,
        max_moves: int = 4,
        fuse_initial: bool = True,
        region_fence: bool = False,
    ):
        if temporal.input_dim != spatial.output_dim:
            raise ValueError("temporal input width must equal the spatial output width")
        if integrator.unit_dim != temporal.output_dim:
            raise ValueError("integrator unit width must equal the temporal output width")
        if len(policies) != integrator.n_units:
            raise ValueError(f"{len(policies)} policies for {integrator.n_units} locators")
        for p in policies:
            if p.in_dim != temporal.output_dim + 1 or p.out_dim != action_space.n_actions:
                raise ValueError("policy widths do not match the observation and action space")

        self.spatial = spatial
        self.temporal = temporal
        self.policies = policies
        self.integrator = integrator
        self.classifier = classifier
        self._action_space = action_space
        self._max_moves = max_moves
        self._fuse_initial = fuse_initial
        self._region_fence = region_fence

    @property
    def n_locators(self) -> int:
        return len(self.policies)

    @property
    def action_space(self) -> ActionSpace:
        return self._action_space

    @property
    def max_moves(self) -> int:
        return self._max_moves

    @property
    def fuse_initial(self) -> bool:
        return self._fuse_initial

    @property
    def region_fence(self) -> bool:
        return self._region_fence

    @property
    def observation_dim(self) -> int:
        return self.temporal.output_dim + 1

    def backbone_parameters(self) -> Dict[str, Tensor]:
        out = {}
        for name in BACKBONE:
            out.update(getattr(self, name).named_parameters(prefix=name + "."))
        return out

    def policy_parameters(self, index: Optional[int] = None) -> Dict[str, Tensor]:
        if index is not None:
            return self.policies[index].named_parameters(prefix=f"policies.{index}.")
        out = {}
        for i in range(self.n_locators):
            out.update(self.policy_parameters(i))
        return out

    def backbone_checksum(self) -> str:
        return checksum_of(self.backbone_parameters())

    def policy_checksum(self) -> str:
        return checksum_of(self.policy_parameters())

    def cost_model(self) -> CostModel:
        note = (
            f"spatial cost {self.spatial.declared_cost():.6g} FLOPs/frame "
            + (
                "(modeled, calibrated constant)"
                if isinstance(self.spatial, Passthrough)
                else "(analytic)"
            )
        )
        return CostModel(
            spatial_per_frame=self.spatial.declared_cost(),
            temporal_per_step=self.temporal.step_flops(),
            policy_per_call=self.policies[0].flops() + self.action_space.n_actions,
            integration_per_call=self.integrator.flops(),
            classifier_per_call=self.classifier.flops(),
            spatial_note=note,
        )

    def recognize(
        self,
        video: VideoSample,
        mode: str = "argmax",
        rng: Optional[np.random.Generator] = None,
        trace: Optional[RunTrace] = None,
    ) -> Tuple[Episode, Tensor]:
        """Run an episode and return it with the final class probabilities."""
        episode = run_episode(video, self, mode, rng, trace)
        return episode, predict_proba(self.integrator, self.classifier, episode.units, trace)

    def recognize_batch(
        self,
        videos: Sequence[VideoSample],
        mode: str = "argmax",
        rng: Optional[np.random.Generator] = None,
        trace: Optional[RunTrace] = None,
    ) -> Tuple[List[Episode], Tensor]:
        """Run a lockstep batch and return its episodes with ``(B, n_classes)`` probabilities."""
        batch = run_batch(videos, self, mode, rng, trace)
        return batch.episodes, predict_proba(self.integrator, self.classifier, batch.units, trace)
