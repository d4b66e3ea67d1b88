"""
The three training stages and evaluation.

Stage I trains the backbone (spatial, temporal, integrator, classifier) on episodes
of a fixed sampling strategy while the policies stay frozen. Stage II freezes the
backbone and trains the policies with the centralized soft actor-critic on the
shared accuracy-minus-cost reward. Stage III alternates blocks of both.

Freezing is not a convention: every stage checksums the parameters it must not
touch before and after, and raises :class:`FreezeViolation` if they changed.
"""
import logging
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import Adam, Tape, Tensor, backward, cross_entropy, no_grad
from ..data import DatasetSplit, VideoSample, batch_iter
from ..metrics import (
    CostReport,
    RunTrace,
    flops_ledger,
    frame_rate,
    mean_average_precision,
    top1_accuracy,
)
from ..nn import checksum_of
from ..recognizer import (
    Episode,
    TrajectoryRow,
    global_snapshot,
    parse_mode,
    predict_proba,
    run_batch,
)
from ..recognizer.integration import predict_logits
from ..rl import (
    CtdeLearner,
    ReplayBuffer,
    SacOptimizers,
    Transition,
    compute_reward,
    ctde_train_step,
)

logger = logging.getLogger(__name__)

STAGES = ("warmup", "policy_learning", "finetune")
REWARD_COUNTS = ("cumulative", "per_step")

LogFn = Optional[Callable[[Dict], None]]


class FreezeViolation(RuntimeError):
    pass


@dataclass(frozen=True)
class StageConfig:
    """
    Schedule and learning rates of one stage.

    ``lr`` is the backbone rate (warm-up and fine-tuning); the three SAC rates apply
    to policy learning and to the policy blocks of fine-tuning. ``period`` is the
    length in epochs of each fine-tuning block and ``epochs`` is the number of
    cycles for that stage.
    """

    stage: str
    epochs: int
    lr: float = 1e-5
    lr_policy: float = 1e-5
    lr_critic: float = 5e-5
    lr_alpha: float = 5e-4
    video_batch_size: int = 8
    period: int = 5

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage '{self.stage}'. Available: {STAGES}")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        for name in ("lr", "lr_policy", "lr_critic", "lr_alpha"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.video_batch_size < 1 or self.period < 1:
            raise ValueError("video_batch_size and period must be >= 1")


@contextmanager
def frozen(params: Mapping[str, Tensor], what: str):
    """Assert that ``params`` are bit-identical on exit."""
    before = checksum_of(params)
    yield
    if checksum_of(params) != before:
        raise FreezeViolation(f"{what} parameters changed while frozen")


# ---------------------------------------------------------------------------------
# Backbone training
# ---------------------------------------------------------------------------------
def backbone_step(
    model, videos: Sequence[VideoSample], mode: str, rng: np.random.Generator, opt: Adam
) -> float:
    """One cross-entropy step of the backbone on the final predictions of ``videos``.

    The videos run as one lockstep batch; the loss is the mean over the batch.
    """
    opt.zero_grad()
    with Tape() as tape:
        batch = run_batch(videos, model, mode, rng)
        logits = predict_logits(model.integrator, model.classifier, batch.units)
        loss = cross_entropy(logits, [v.label for v in videos])
    backward(loss, tape)
    opt.step()
    return loss.item()


def _backbone_epochs(
    model,
    train: Sequence[VideoSample],
    mode: str,
    opt: Adam,
    epochs: range,
    batch_size: int,
    seed: int,
    rng: np.random.Generator,
    log: LogFn,
    extra: Optional[Dict] = None,
) -> List[float]:
    means = []
    for epoch in epochs:
        losses = []
        for step, batch in enumerate(batch_iter(train, batch_size, seed, True, epoch)):
            losses.append(backbone_step(model, batch, mode, rng, opt))
            if log is not None:
                log({**(extra or {}), "epoch": epoch, "step": step, "loss": losses[-1]})
        means.append(float(np.mean(losses)))
        logger.info(f"backbone epoch {epoch}: mean loss {means[-1]:.4f} ({mode} sampling)")
    return means


def stage1_warmup(
    cfg: StageConfig,
    split: DatasetSplit,
    model,
    strategy: str = "random25",
    seed: int = 0,
    log: LogFn = None,
) -> List[float]:
    """
    Train the backbone on fixed-budget episodes with the policies frozen.

    Returns
    -------
    list of float
        Mean training loss of each epoch.
    """
    kind, _ = parse_mode(strategy)
    if kind in ("sample", "argmax"):
        raise ValueError(f"warm-up needs a fixed sampling strategy, got '{strategy}'")

    opt = Adam(model.backbone_parameters(), cfg.lr)
    rng = np.random.default_rng([seed, 1])
    with frozen(model.policy_parameters(), "policy"):
        return _backbone_epochs(
            model,
            split.train,
            strategy,
            opt,
            range(cfg.epochs),
            cfg.video_batch_size,
            seed,
            rng,
            log,
        )


# ---------------------------------------------------------------------------------
# Policy learning
# ---------------------------------------------------------------------------------
def _transitions(
    episode: Episode,
    p_true: Sequence[float],
    lam: float,
    n_locators: int,
    n_actions: int,
    reward_count: str,
) -> Tuple[List[Transition], List[float]]:
    transitions, rewards = [], []
    for log in episode.steps:
        n_t = log.frames_total if reward_count == "cumulative" else log.frames_new
        r = compute_reward(p_true[log.step], p_true[log.step - 1], lam, n_t)
        rewards.append(r)
        g = global_snapshot(log.obs_pre, log.actions, n_actions)
        g_next = global_snapshot(log.obs_post, [-1] * n_locators, n_actions)
        for i in log.acted:
            transitions.append(
                Transition(
                    locator=i,
                    obs=log.obs_pre[i],
                    action=log.actions[i],
                    reward=r,
                    next_obs=log.obs_post[i],
                    done=log.done[i],
                    g=g,
                    g_next=g_next,
                )
            )
    return transitions, rewards


def collect_batch(
    videos: Sequence[VideoSample],
    model,
    lam: float,
    rng: np.random.Generator,
    reward_count: str = "cumulative",
) -> Tuple[List[Transition], List[Episode], List[float]]:
    """
    Run sampled episodes of a lockstep batch and turn their steps into transitions
    with shared rewards.

    The reward of step ``t`` of a video compares the probability of its true class
    after the step with the one after the previous step (step 0 being the initial
    observations) and charges ``λ`` per frame, counted cumulatively over all
    locators or per step.
    """
    if reward_count not in REWARD_COUNTS:
        raise ValueError(f"reward_count must be one of {REWARD_COUNTS}")

    labels = np.array([v.label for v in videos])
    p_true: List[List[float]] = [[] for _ in videos]

    def on_step(step, units, live):
        probs = predict_proba(model.integrator, model.classifier, units).data
        for b in np.flatnonzero(live):
            p_true[b].append(float(probs[b, labels[b]]))

    with no_grad():
        batch = run_batch(videos, model, "sample", rng, on_step=on_step)

    transitions, rewards = [], []
    for episode, p in zip(batch.episodes, p_true):
        t, r = _transitions(
            episode, p, lam, model.n_locators, model.action_space.n_actions, reward_count
        )
        transitions.extend(t)
        rewards.extend(r)
    return transitions, batch.episodes, rewards


def collect_episode(
    video: VideoSample,
    model,
    lam: float,
    rng: np.random.Generator,
    reward_count: str = "cumulative",
) -> Tuple[List[Transition], Episode, List[float]]:
    """The transitions, episode and step rewards of one sampled video."""
    transitions, episodes, rewards = collect_batch([video], model, lam, rng, reward_count)
    return transitions, episodes[0], rewards


def _policy_epochs(
    model,
    learner: CtdeLearner,
    train: Sequence[VideoSample],
    opts: SacOptimizers,
    buffer: ReplayBuffer,
    epochs: range,
    batch_size: int,
    sac_batch_size: int,
    lam: float,
    reward_count: str,
    seed: int,
    rng: np.random.Generator,
    log: LogFn,
    counter: List[int],
) -> List[float]:
    frames_per_epoch = []
    for epoch in epochs:
        frames = []
        for batch in batch_iter(train, batch_size, seed, True, epoch):
            transitions, episodes, rewards = collect_batch(batch, model, lam, rng, reward_count)
            buffer.extend(transitions)
            batch_frames = [ep.frames for ep in episodes]
            frames.extend(batch_frames)

            if len(buffer) < sac_batch_size:
                continue
            report = ctde_train_step(buffer, model, learner, opts, sac_batch_size)
            counter[0] += 1
            if log is not None:
                log(
                    {
                        "step": counter[0],
                        "policy_loss": report.policy_loss,
                        "critic_loss": report.critic_loss,
                        "alpha_loss": report.alpha_loss,
                        "alpha": report.alpha,
                        "mean_reward": float(np.mean(rewards)) if rewards else 0.0,
                        "mean_frames": float(np.mean(batch_frames)),
                    }
                )
        frames_per_epoch.append(float(np.mean(frames)))
        logger.info(
            f"policy epoch {epoch}: {frames_per_epoch[-1]:.2f} frames/video, "
            f"alpha={learner.temperature.alpha:.4g}, buffer={len(buffer)}"
        )
    return frames_per_epoch


def stage2_policy(
    cfg: StageConfig,
    split: DatasetSplit,
    model,
    learner: CtdeLearner,
    lam: float = 0.1,
    reward_count: str = "cumulative",
    sac_batch_size: int = 64,
    replay_capacity: int = 50000,
    seed: int = 0,
    log: LogFn = None,
) -> List[float]:
    """
    Train the policies, critics and temperature with the backbone frozen.

    One SAC update follows each collected video batch once the buffer holds at
    least ``sac_batch_size`` transitions.

    Returns
    -------
    list of float
        Mean frames observed per video in each epoch.
    """
    opts = SacOptimizers.create(model, learner, cfg.lr_policy, cfg.lr_critic, cfg.lr_alpha)
    buffer = ReplayBuffer(replay_capacity, seed=[seed, 2, 0])
    rng = np.random.default_rng([seed, 2])
    with frozen(model.backbone_parameters(), "backbone"):
        return _policy_epochs(
            model,
            learner,
            split.train,
            opts,
            buffer,
            range(cfg.epochs),
            cfg.video_batch_size,
            sac_batch_size,
            lam,
            reward_count,
            seed,
            rng,
            log,
            [0],
        )


# ---------------------------------------------------------------------------------
# Fine-tuning
# ---------------------------------------------------------------------------------
def stage3_finetune(
    cfg: StageConfig,
    split: DatasetSplit,
    model,
    learner: CtdeLearner,
    lam: float = 0.1,
    reward_count: str = "cumulative",
    sac_batch_size: int = 64,
    replay_capacity: int = 50000,
    first: str = "backbone",
    seed: int = 0,
    log: LogFn = None,
    policy_log: LogFn = None,
):
    """
    Alternate backbone and policy blocks of ``cfg.period`` epochs, ``cfg.epochs`` cycles.

    Backbone blocks train under the current argmax policy with the policies frozen;
    policy blocks repeat the policy-learning procedure with the backbone frozen.
    """
    if first not in ("backbone", "policy"):
        raise ValueError(f"first must be 'backbone' or 'policy', got '{first}'")

    backbone_opt = Adam(model.backbone_parameters(), cfg.lr)
    sac_opts = SacOptimizers.create(model, learner, cfg.lr_policy, cfg.lr_critic, cfg.lr_alpha)
    buffer = ReplayBuffer(replay_capacity, seed=[seed, 3, 0])
    rng = np.random.default_rng([seed, 3])
    counter = [0]
    order = ("backbone", "policy") if first == "backbone" else ("policy", "backbone")

    epoch = 0
    for cycle in range(cfg.epochs):
        for kind in order:
            block = 2 * cycle + order.index(kind)
            epochs = range(epoch, epoch + cfg.period)
            logger.info(f"fine-tuning cycle {cycle}: {kind} block")
            if kind == "backbone":
                with frozen(model.policy_parameters(), "policy"):
                    _backbone_epochs(
                        model,
                        split.train,
                        "argmax",
                        backbone_opt,
                        epochs,
                        cfg.video_batch_size,
                        seed,
                        rng,
                        log,
                        extra={"block": block, "kind": kind},
                    )
            else:
                with frozen(model.backbone_parameters(), "backbone"):
                    _policy_epochs(
                        model,
                        learner,
                        split.train,
                        sac_opts,
                        buffer,
                        epochs,
                        cfg.video_batch_size,
                        sac_batch_size,
                        lam,
                        reward_count,
                        seed,
                        rng,
                        policy_log,
                        counter,
                    )
            epoch += cfg.period


# ---------------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------------
def evaluate(
    videos: Sequence[VideoSample],
    model,
    n_classes: int,
    mode: str = "argmax",
    seed: int = 0,
    basis: float = 120,
    trajectories: Optional[List[TrajectoryRow]] = None,
    batch_size: int = 64,
) -> CostReport:
    """
    Recognise every video and aggregate accuracy and modeled cost.

    Parameters
    ----------
    videos
        Usually the test split.
    model
        The recognition model.
    n_classes
        Number of classes.
    mode
        Sampling mode of the episodes.
    seed
        Seed for sampled or random modes.
    basis
        Frame-rate basis. It may not be shorter than the longest video, or the
        frame rate of the "all" strategy would exceed one.
    trajectories
        If given, trajectory rows of every episode are appended to it.
    batch_size
        Videos recognised per lockstep batch.
    """
    if not videos:
        raise ValueError("cannot evaluate on an empty split")
    longest = max(v.n_frames for v in videos)
    if basis < longest:
        raise ValueError(
            f"frame-rate basis {basis} is shorter than the longest video ({longest} frames)"
        )
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    trace = RunTrace()
    rng = np.random.default_rng([seed, 4])
    scores, labels = [], []
    with no_grad():
        for lo in range(0, len(videos), batch_size):
            chunk = videos[lo : lo + batch_size]
            episodes, probs = model.recognize_batch(chunk, mode, rng, trace)
            scores.extend(probs.data)
            labels.extend(v.label for v in chunk)
            if trajectories is not None:
                for episode in episodes:
                    trajectories.extend(episode.trajectory)

    scores = np.array(scores)
    frames_mean = trace.frames / trace.videos
    ledger = flops_ledger(trace, model.cost_model())
    del ledger["flops_total"]
    return CostReport(
        top1=top1_accuracy(scores, labels),
        mAP=mean_average_precision(scores, labels, n_classes),
        frame_rate=frame_rate(frames_mean, basis),
        frames_mean=frames_mean,
        **ledger,
    )
