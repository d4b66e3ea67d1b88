"""
The framework class holding the architecture of a hierarchical recognizer.
"""
import numpy as np

from .._internals import cached_quantity, get_mdl, parameter, positive_int
from ..data.source import VideoSource
from ..nn import MLP
from .integration import Classifier
from .locator import ActionSpace
from .model import RecognitionModel

N_ACTIONS = 4


class Recognizer(VideoSource):
    """
    Architecture parameters of the recognizer, and the networks built from them.

    In addition to the parameters directly passed to this class, others are available
    which are passed on to its superclass (:class:`~strider.data.source.VideoSource`).

    Parameters
    ----------
    n_locators
        Number of locators ``N``.
    max_moves
        Maximum observations per locator ``m``.
    delta
        Minimum moving stride ``δ``; actions move ``{0, δ, 2δ, 3δ}`` frames.
    spatial_model, temporal_model, integrator_model
        Names (or classes) of the spatial encoder, temporal network and integrator.
    spatial_params, temporal_params, integrator_params
        Model parameters of each.
    position_embedding
        Whether the transformer integrator adds locator-ordinal position embeddings.
    policy_layers, policy_width
        Depth (linear layers) and hidden width of every policy network.
    init_seed
        Seed for parameter initialisation.
    initial_frame_fusion
        Whether a locator's initial frame stays part of its unit embedding.
    region_fence
        Whether a locator stops on leaving its own placement region.

    Examples
    --------
    >>> rec = Recognizer(temporal_model="MeanPool", integrator_model="MaxPool")
    >>> rec.model.n_locators
    3
    """

    def __init__(
        self,
        n_locators: int = 3,
        max_moves: int = 4,
        delta: int = 3,
        spatial_model="Passthrough",
        spatial_params=None,
        temporal_model="LSTM",
        temporal_params=None,
        integrator_model="Transformer",
        integrator_params=None,
        position_embedding: bool = True,
        policy_layers: int = 4,
        policy_width: int = 512,
        init_seed: int = 0,
        initial_frame_fusion: bool = True,
        region_fence: bool = False,
        **source_kwargs,
    ):
        super().__init__(**source_kwargs)

        self.n_locators = n_locators
        self.max_moves = max_moves
        self.delta = delta
        self.spatial_model = spatial_model
        self.spatial_params = spatial_params or {}
        self.temporal_model = temporal_model
        self.temporal_params = temporal_params or {}
        self.integrator_model = integrator_model
        self.integrator_params = integrator_params or {}
        self.position_embedding = position_embedding
        self.policy_layers = policy_layers
        self.policy_width = policy_width
        self.init_seed = init_seed
        self.initial_frame_fusion = initial_frame_fusion
        self.region_fence = region_fence

    def validate(self):
        super().validate()
        if self.feature_dir is None and self.n_locators > self.n_frames:
            raise ValueError(f"n_locators={self.n_locators} exceeds n_frames={self.n_frames}")

    @parameter("param")
    def n_locators(self, val):
        """
        Number of local unit locators.

        :type: int
        """
        return positive_int("n_locators", val)

    @parameter("param")
    def max_moves(self, val):
        """
        Maximum moving time: observations per locator per video.

        :type: int
        """
        return positive_int("max_moves", val)

    @parameter("param")
    def delta(self, val):
        """
        Minimum moving stride, in frames.

        :type: int
        """
        return positive_int("delta", val)

    @parameter("model")
    def spatial_model(self, val):
        """
        The spatial encoder shared by all locators.

        :type: str or :class:`~strider.recognizer.spatial.SpatialEncoder` subclass
        """
        return get_mdl(val, "SpatialEncoder")

    @parameter("param")
    def spatial_params(self, val):
        """
        Model parameters for `spatial_model`.

        :type: dict
        """
        return val

    @parameter("model")
    def temporal_model(self, val):
        """
        The temporal network producing each locator's context.

        :type: str or :class:`~strider.recognizer.temporal.TemporalNet` subclass
        """
        return get_mdl(val, "TemporalNet")

    @parameter("param")
    def temporal_params(self, val):
        """
        Model parameters for `temporal_model`.

        :type: dict
        """
        return val

    @parameter("model")
    def integrator_model(self, val):
        """
        The multi-unit integration module.

        :type: str or :class:`~strider.recognizer.integration.Integrator` subclass
        """
        return get_mdl(val, "Integrator")

    @parameter("param")
    def integrator_params(self, val):
        """
        Model parameters for `integrator_model`.

        :type: dict
        """
        return val

    @parameter("switch")
    def position_embedding(self, val):
        """
        Add learned locator-ordinal position embeddings in the transformer integrator.

        :type: bool
        """
        return bool(val)

    @parameter("param")
    def policy_layers(self, val):
        """
        Number of linear layers of each policy network.

        :type: int
        """
        return positive_int("policy_layers", val)

    @parameter("param")
    def policy_width(self, val):
        """
        Hidden width of each policy network.

        :type: int
        """
        return positive_int("policy_width", val)

    @parameter("param")
    def init_seed(self, val):
        """
        Seed for parameter initialisation.

        :type: int
        """
        return positive_int("init_seed", val, minimum=0)

    @parameter("switch")
    def initial_frame_fusion(self, val):
        """
        Keep each locator's initial frame in its unit embedding.

        :type: bool
        """
        return bool(val)

    @parameter("switch")
    def region_fence(self, val):
        """
        Stop a locator when it leaves its placement region.

        :type: bool
        """
        return bool(val)

    @cached_quantity
    def action_space(self) -> ActionSpace:
        """The locators' action space."""
        return ActionSpace(self.delta, N_ACTIONS)

    @cached_quantity
    def model(self) -> RecognitionModel:
        """Freshly initialised networks for the current architecture."""
        n = self.n_locators

        def rng(k):
            return np.random.default_rng([self.init_seed, k])

        spatial = self.spatial_model(self.feature_dim, rng(0), **self.spatial_params)
        temporal = self.temporal_model(spatial.output_dim, rng(1), **self.temporal_params)

        iparams = dict(self.integrator_params)
        if "position_embedding" in self.integrator_model._defaults:
            iparams["position_embedding"] = self.position_embedding
        integrator = self.integrator_model(temporal.output_dim, n, rng(2), **iparams)
        classifier = Classifier(integrator.output_dim, self.n_classes, rng(3))

        dims = (
            [temporal.output_dim + 1]
            + [self.policy_width] * (self.policy_layers - 1)
            + [self.action_space.n_actions]
        )
        policies = [MLP(dims, rng(4 + i)) for i in range(n)]

        return RecognitionModel(
            spatial,
            temporal,
            policies,
            integrator,
            classifier,
            self.action_space,
            max_moves=self.max_moves,
            fuse_initial=self.initial_frame_fusion,
            region_fence=self.region_fence,
        )
