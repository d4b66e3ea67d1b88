"""Centralized-training, decentralized-execution discrete soft actor-critic."""
from .sac import (
    CriticEnsemble,
    CtdeLearner,
    LossReport,
    ReplayBuffer,
    ReplayUnderfilledError,
    SacOptimizers,
    Temperature,
    Transition,
    alpha_loss,
    compute_reward,
    critic_loss,
    ctde_train_step,
    mask_own_action,
    policy_loss,
    soft_state_value,
    soft_update,
)
