"""
The top-level framework class: a recognizer plus everything needed to train it.
"""
import logging
from typing import Dict, List, Optional, Set

import numpy as np

from .._internals import cached_quantity, dependencies, parameter, positive_int
from ..metrics import CostReport
from ..nn import checksum_of
from ..recognizer import Recognizer, TrajectoryRow, parse_mode
from ..recognizer.recognizer import N_ACTIONS
from ..rl import CtdeLearner
from . import stages

logger = logging.getLogger(__name__)


def _positive_float(name, val):
    val = float(val)
    if val <= 0:
        raise ValueError(f"{name} must be > 0, got {val}")
    return val


class Experiment(Recognizer):
    """
    A trainable recognizer: reward, SAC and schedule parameters on top of the
    architecture and data parameters of :class:`~strider.recognizer.Recognizer`.

    Networks are built lazily (``model`` and ``learner``). Changing a training-only
    parameter such as ``lam`` keeps them; changing an architecture parameter builds
    fresh ones.

    Parameters
    ----------
    lam
        Trade-off factor ``λ`` between accuracy gain and frames in the reward.
    gamma, tau
        Reward discount and target soft-update factor.
    target_entropy, init_alpha
        Entropy target ``H̄`` and initial temperature ``α``.
    reward_count
        "cumulative" charges all frames selected so far at every step; "per_step" only
        the frames of the step.
    replay_capacity, sac_batch_size
        Replay buffer capacity and SAC batch size (in transitions).
    critic_layers, critic_width
        Critic depth and width.
    lr_warmup, lr_policy, lr_critic, lr_alpha, lr_finetune
        Learning rates.
    video_batch_size
        Videos per backbone step and per collection batch.
    warmup_epochs, policy_epochs
        Epochs of the first two stages.
    finetune_cycles, finetune_period
        Number of fine-tuning cycles, and epochs per block within a cycle.
    finetune_first
        Which block opens each cycle: "backbone" or "policy".
    warmup_strategy
        Fixed-budget sampling mode used to train the backbone in the warm-up.
    seed
        Seed of every training-time random stream.
    frame_basis
        Frame count against which frame rates are reported.

    Examples
    --------
    >>> exp = Experiment(n_train=40, n_test=20, warmup_epochs=1)
    >>> losses = exp.warmup()
    >>> exp.evaluate("uniform25").frame_rate
    0.25
    """

    def __init__(
        self,
        lam: float = 0.1,
        gamma: float = 0.99,
        tau: float = 0.99,
        target_entropy: float = float(0.6 * np.log(N_ACTIONS)),
        init_alpha: float = 0.2,
        reward_count: str = "cumulative",
        replay_capacity: int = 50000,
        sac_batch_size: int = 64,
        critic_layers: int = 5,
        critic_width: int = 512,
        lr_warmup: float = 1e-5,
        lr_policy: float = 1e-5,
        lr_critic: float = 5e-5,
        lr_alpha: float = 5e-4,
        lr_finetune: float = 1e-5,
        video_batch_size: int = 8,
        warmup_epochs: int = 15,
        policy_epochs: int = 30,
        finetune_cycles: int = 2,
        finetune_period: int = 5,
        finetune_first: str = "backbone",
        warmup_strategy: str = "random25",
        seed: int = 0,
        frame_basis: float = 120.0,
        **recognizer_kwargs,
    ):
        super().__init__(**recognizer_kwargs)

        self.lam = lam
        self.gamma = gamma
        self.tau = tau
        self.target_entropy = target_entropy
        self.init_alpha = init_alpha
        self.reward_count = reward_count
        self.replay_capacity = replay_capacity
        self.sac_batch_size = sac_batch_size
        self.critic_layers = critic_layers
        self.critic_width = critic_width
        self.lr_warmup = lr_warmup
        self.lr_policy = lr_policy
        self.lr_critic = lr_critic
        self.lr_alpha = lr_alpha
        self.lr_finetune = lr_finetune
        self.video_batch_size = video_batch_size
        self.warmup_epochs = warmup_epochs
        self.policy_epochs = policy_epochs
        self.finetune_cycles = finetune_cycles
        self.finetune_period = finetune_period
        self.finetune_first = finetune_first
        self.warmup_strategy = warmup_strategy
        self.seed = seed
        self.frame_basis = frame_basis

    # ===========================================================================
    # PARAMETERS
    # ===========================================================================
    @parameter("param")
    def lam(self, val):
        """
        Trade-off factor between accuracy gain and frames observed.

        :type: float
        """
        val = float(val)
        if val < 0:
            raise ValueError(f"lam must be >= 0, got {val}")
        return val

    @parameter("param")
    def gamma(self, val):
        """
        Reward discount factor.

        :type: float
        """
        val = float(val)
        if not 0 <= val <= 1:
            raise ValueError(f"gamma must be in [0, 1], got {val}")
        return val

    @parameter("param")
    def tau(self, val):
        """
        Soft-update factor: ``target ← τ·local + (1 − τ)·target``.

        :type: float
        """
        val = float(val)
        if not 0 <= val <= 1:
            raise ValueError(f"tau must be in [0, 1], got {val}")
        return val

    @parameter("param")
    def target_entropy(self, val):
        """
        Entropy target of the temperature update.

        :type: float
        """
        val = float(val)
        if not 0 <= val <= np.log(N_ACTIONS):
            raise ValueError(f"target_entropy must be in [0, ln {N_ACTIONS}], got {val}")
        return val

    @parameter("param")
    def init_alpha(self, val):
        """
        Initial entropy temperature.

        :type: float
        """
        return _positive_float("init_alpha", val)

    @parameter("option")
    def reward_count(self, val):
        """
        How frames are charged in the reward: "cumulative" or "per_step".

        :type: str
        """
        if val not in stages.REWARD_COUNTS:
            raise ValueError(f"reward_count must be one of {stages.REWARD_COUNTS}, got {val}")
        return val

    @parameter("res")
    def replay_capacity(self, val):
        """
        Replay buffer capacity, in transitions.

        :type: int
        """
        return positive_int("replay_capacity", val)

    @parameter("res")
    def sac_batch_size(self, val):
        """
        Transitions per SAC update.

        :type: int
        """
        return positive_int("sac_batch_size", val)

    @parameter("param")
    def critic_layers(self, val):
        """
        Linear layers of each critic.

        :type: int
        """
        return positive_int("critic_layers", val)

    @parameter("param")
    def critic_width(self, val):
        """
        Hidden width of each critic.

        :type: int
        """
        return positive_int("critic_width", val)

    @parameter("param")
    def lr_warmup(self, val):
        """
        Backbone learning rate of the warm-up.

        :type: float
        """
        return _positive_float("lr_warmup", val)

    @parameter("param")
    def lr_policy(self, val):
        """
        Policy learning rate.

        :type: float
        """
        return _positive_float("lr_policy", val)

    @parameter("param")
    def lr_critic(self, val):
        """
        Critic learning rate.

        :type: float
        """
        return _positive_float("lr_critic", val)

    @parameter("param")
    def lr_alpha(self, val):
        """
        Temperature learning rate.

        :type: float
        """
        return _positive_float("lr_alpha", val)

    @parameter("param")
    def lr_finetune(self, val):
        """
        Backbone learning rate of fine-tuning.

        :type: float
        """
        return _positive_float("lr_finetune", val)

    @parameter("res")
    def video_batch_size(self, val):
        """
        Videos per batch.

        :type: int
        """
        return positive_int("video_batch_size", val)

    @parameter("res")
    def warmup_epochs(self, val):
        """
        Epochs of the warm-up.

        :type: int
        """
        return positive_int("warmup_epochs", val, minimum=0)

    @parameter("res")
    def policy_epochs(self, val):
        """
        Epochs of policy learning.

        :type: int
        """
        return positive_int("policy_epochs", val, minimum=0)

    @parameter("res")
    def finetune_cycles(self, val):
        """
        Fine-tuning cycles (each a backbone block and a policy block).

        :type: int
        """
        return positive_int("finetune_cycles", val, minimum=0)

    @parameter("res")
    def finetune_period(self, val):
        """
        Epochs per fine-tuning block.

        :type: int
        """
        return positive_int("finetune_period", val)

    @parameter("option")
    def finetune_first(self, val):
        """
        The block opening each fine-tuning cycle: "backbone" or "policy".

        :type: str
        """
        if val not in ("backbone", "policy"):
            raise ValueError(f"finetune_first must be 'backbone' or 'policy', got {val}")
        return val

    @parameter("option")
    def warmup_strategy(self, val):
        """
        Sampling mode of the warm-up, e.g. "random25", "uniform50" or "all".

        :type: str
        """
        kind, _ = parse_mode(val)
        if kind in ("sample", "argmax"):
            raise ValueError(f"warmup_strategy must be a fixed-budget mode, got {val}")
        return val

    @parameter("param")
    def seed(self, val):
        """
        Seed of the training-time random streams.

        :type: int
        """
        return positive_int("seed", val, minimum=0)

    @parameter("option")
    def frame_basis(self, val):
        """
        Frames against which the frame rate is reported.

        :type: float
        """
        return _positive_float("frame_basis", val)

    # ===========================================================================
    # DERIVED QUANTITIES
    # ===========================================================================
    @cached_quantity
    def learner(self) -> CtdeLearner:
        """Critics and temperature for the current architecture."""
        return CtdeLearner(
            n_locators=self.n_locators,
            obs_dim=self.model.observation_dim,
            n_actions=self.action_space.n_actions,
            rng=np.random.default_rng([self.init_seed, 100]),
            critic_layers=self.critic_layers,
            critic_width=self.critic_width,
            init_alpha=self.init_alpha,
            target_entropy=self.target_entropy,
            gamma=self.gamma,
            tau=self.tau,
        )

    def stage_config(self, stage: str) -> stages.StageConfig:
        """The schedule and rates of one training stage."""
        epochs = {
            "warmup": self.warmup_epochs,
            "policy_learning": self.policy_epochs,
            "finetune": self.finetune_cycles,
        }
        return stages.StageConfig(
            stage=stage,
            epochs=epochs[stage],
            lr=self.lr_finetune if stage == "finetune" else self.lr_warmup,
            lr_policy=self.lr_policy,
            lr_critic=self.lr_critic,
            lr_alpha=self.lr_alpha,
            video_batch_size=self.video_batch_size,
            period=self.finetune_period,
        )

    # ===========================================================================
    # STAGES
    # ===========================================================================
    def warmup(self, log: stages.LogFn = None) -> List[float]:
        """Stage I: train the backbone with the warm-up sampling strategy."""
        logger.info(f"warm-up: {self.warmup_epochs} epochs of {self.warmup_strategy} sampling")
        return stages.stage1_warmup(
            self.stage_config("warmup"),
            self.split,
            self.model,
            strategy=self.warmup_strategy,
            seed=self.seed,
            log=log,
        )

    def learn_policy(self, log: stages.LogFn = None) -> List[float]:
        """Stage II: train the policies with the backbone frozen."""
        logger.info(f"policy learning: {self.policy_epochs} epochs, lam={self.lam}")
        return stages.stage2_policy(
            self.stage_config("policy_learning"),
            self.split,
            self.model,
            self.learner,
            lam=self.lam,
            reward_count=self.reward_count,
            sac_batch_size=self.sac_batch_size,
            replay_capacity=self.replay_capacity,
            seed=self.seed,
            log=log,
        )

    def finetune(self, log: stages.LogFn = None, policy_log: stages.LogFn = None):
        """Stage III: alternate backbone and policy blocks."""
        logger.info(
            f"fine-tuning: {self.finetune_cycles} cycles of {self.finetune_period}-epoch blocks"
        )
        stages.stage3_finetune(
            self.stage_config("finetune"),
            self.split,
            self.model,
            self.learner,
            lam=self.lam,
            reward_count=self.reward_count,
            sac_batch_size=self.sac_batch_size,
            replay_capacity=self.replay_capacity,
            first=self.finetune_first,
            seed=self.seed,
            log=log,
            policy_log=policy_log,
        )

    def evaluate(
        self,
        mode: str = "argmax",
        split: str = "test",
        trajectories: Optional[List[TrajectoryRow]] = None,
    ) -> CostReport:
        """Accuracy and modeled cost over one split under a sampling mode."""
        videos = {"test": self.split.test, "train": self.split.train}[split]
        return stages.evaluate(
            videos,
            self.model,
            self.n_classes,
            mode=mode,
            seed=self.seed,
            basis=self.frame_basis,
            trajectories=trajectories,
        )

    def report_header(self, mode: str) -> List[str]:
        cm = self.model.cost_model()
        return [
            f"strider cost report, mode={mode}",
            "flops are modeled per video; " + cm.spatial_note,
            "linear layers 2*in*out, activations 1/element, layer norm 5/element",
        ]

    # ===========================================================================
    # STATE
    # ===========================================================================
    def state_dict(self) -> Dict[str, np.ndarray]:
        """Every network parameter, including critics, targets and temperature."""
        out = self.model.state_dict(prefix="model.")
        out.update(self.learner.state_dict(prefix="learner."))
        return out

    def load_state_dict(self, state: Dict[str, np.ndarray]):
        self.model.load_state_dict(state, prefix="model.")
        self.learner.load_state_dict(state, prefix="learner.")

    def checksum(self) -> str:
        """SHA-256 over every network parameter."""
        return checksum_of(
            {**self.model.named_parameters("model."), **self.learner.named_parameters("learner.")}
        )

    def network_inputs(self) -> Set[str]:
        """Parameters the model and learner networks were built from.

        Changing any of them replaces the networks with freshly initialised ones.
        """
        return dependencies(self, "model") | dependencies(self, "learner")
