"""
Discrete soft actor-critic with centralized critics and decentralized policies.

Every locator ``i`` has its own policy (acting on its local observation only) and
its own pair of critics, which read the global snapshot ``g``: every locator's local
observation and one-hot action. Critic ``i`` outputs one value per action of
locator ``i``; its own action slot in ``g`` is zeroed so the value of each of its
actions is read from the rest of the snapshot. Each critic pair has slowly updated
target copies, and one learned temperature ``α`` is shared by all policies.
"""
import copy
import logging
from collections import deque
from dataclasses import dataclass
from typing import Dict, List, Mapping, Sequence, Union

import numpy as np

from ..autodiff import (
    Adam,
    Tape,
    Tensor,
    backward,
    exp,
    gather,
    log_softmax,
    mul,
    no_grad,
    tsum,
)
from ..nn import MLP, Block

logger = logging.getLogger(__name__)


class ReplayUnderfilledError(RuntimeError):
    pass


def compute_reward(p_t: float, p_prev: float, lam: float, n_t: float) -> float:
    """
    The shared step reward ``(P_t - P_{t-1}) - λ·N_t``.

    ``p_t`` and ``p_prev`` are the probabilities given to the true class after and
    before the step; ``n_t`` is the frame count charged to the step.
    """
    if lam < 0:
        raise ValueError(f"trade-off factor must be >= 0, got {lam}")
    if not (0 <= p_t <= 1 and 0 <= p_prev <= 1):
        raise ValueError(f"probabilities must lie in [0, 1], got {p_t}, {p_prev}")
    if n_t < 0:
        raise ValueError(f"frame count must be >= 0, got {n_t}")
    return (p_t - p_prev) - lam * n_t


ParamSource = Union[Block, Mapping[str, Tensor]]


def _params(src: ParamSource) -> Dict[str, Tensor]:
    return src.named_parameters() if isinstance(src, Block) else dict(src)


def soft_update(local: ParamSource, target: ParamSource, tau: float = 0.99):
    """In place, ``target ← τ·local + (1 − τ)·target``."""
    if not 0 <= tau <= 1:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    lp, tp = _params(local), _params(target)
    if list(lp) != list(tp):
        raise ValueError("local and target networks have different parameters")
    for name, p in lp.items():
        t = tp[name]
        if p.shape != t.shape:
            raise ValueError(f"shape mismatch for '{name}': {p.shape} vs {t.shape}")
        t.data[...] = tau * p.data + (1.0 - tau) * t.data


@dataclass(frozen=True)
class Transition:
    """One locator's experience of one lockstep step."""

    locator: int
    obs: np.ndarray
    action: int
    reward: float
    next_obs: np.ndarray
    done: bool
    g: np.ndarray
    g_next: np.ndarray


class ReplayBuffer:
    """FIFO store of transitions with seeded uniform sampling without replacement."""

    def __init__(self, capacity: int = 50000, seed: Union[int, Sequence[int]] = 0):
        if capacity < 1:
            raise ValueError("replay capacity must be >= 1")
        self.capacity = capacity
        self._items = deque(maxlen=capacity)
        self._rng = np.random.default_rng(seed)

    def __len__(self):
        return len(self._items)

    def push(self, transition: Transition):
        self._items.append(transition)

    def extend(self, transitions: Sequence[Transition]):
        self._items.extend(transitions)

    def sample(self, batch_size: int) -> List[Transition]:
        if len(self) < batch_size:
            raise ReplayUnderfilledError(
                f"replay buffer holds {len(self)} transitions, {batch_size} requested"
            )
        idx = self._rng.choice(len(self), size=batch_size, replace=False)
        return [self._items[i] for i in idx]

    def clear(self):
        self._items.clear()


def _frozen_copy(net: MLP) -> MLP:
    out = copy.deepcopy(net)
    for p in out.parameters():
        p.requires_grad = False
        p.grad = None
    return out


class CriticEnsemble(Block):
    """
    Two critics of one locator and their target copies.

    Parameters
    ----------
    global_dim
        Width of the global snapshot.
    n_actions
        Actions of the locator; one output per action.
    rng
        Generator for initialisation.
    layers, width
        Number of linear layers and hidden width of each critic.
    """

    def __init__(
        self,
        global_dim: int,
        n_actions: int,
        rng: np.random.Generator,
        layers: int = 5,
        width: int = 512,
    ):
        dims = [global_dim] + [width] * (layers - 1) + [n_actions]
        self.q1 = MLP(dims, rng)
        self.q2 = MLP(dims, rng)
        self.q1_target = _frozen_copy(self.q1)
        self.q2_target = _frozen_copy(self.q2)

    def trainable(self, prefix: str = "") -> Dict[str, Tensor]:
        out = self.q1.named_parameters(prefix + "q1.")
        out.update(self.q2.named_parameters(prefix + "q2."))
        return out

    def min_q(self, g: np.ndarray) -> np.ndarray:
        """Elementwise minimum of the two critics (no gradient)."""
        with no_grad():
            return np.minimum(self.q1(Tensor(g)).data, self.q2(Tensor(g)).data)

    def min_target_q(self, g: np.ndarray) -> np.ndarray:
        with no_grad():
            return np.minimum(self.q1_target(Tensor(g)).data, self.q2_target(Tensor(g)).data)

    def update_targets(self, tau: float):
        soft_update(self.q1, self.q1_target, tau)
        soft_update(self.q2, self.q2_target, tau)


class Temperature(Block):
    """The entropy temperature, stored as ``log α`` so ``α`` stays positive."""

    def __init__(self, init_alpha: float = 0.2, target_entropy: float = 0.6 * np.log(4)):
        if init_alpha <= 0:
            raise ValueError(f"initial temperature must be positive, got {init_alpha}")
        self.log_alpha = Tensor(np.log(init_alpha), requires_grad=True)
        self._target_entropy = float(target_entropy)

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha.data))

    @property
    def target_entropy(self) -> float:
        return self._target_entropy


def mask_own_action(g: np.ndarray, index: int, obs_dim: int, n_actions: int) -> np.ndarray:
    """Copy of ``g`` (one row or a batch) with locator ``index``'s action slot zeroed."""
    g = np.array(g, dtype=float)
    lo = index * (obs_dim + n_actions) + obs_dim
    g[..., lo : lo + n_actions] = 0.0
    return g


def soft_state_value(probs: np.ndarray, log_probs: np.ndarray, q: np.ndarray, alpha: float):
    """``V = Σ_a π(a) [Q(a) − α log π(a)]`` for each row."""
    return np.sum(probs * (q - alpha * log_probs), axis=-1)


@dataclass
class _Group:
    index: int
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray
    g: np.ndarray
    g_next: np.ndarray


def _group(batch: Sequence[Transition], obs_dim: int, n_actions: int) -> List[_Group]:
    if not batch:
        raise ValueError("empty batch")
    out = []
    for i in sorted({t.locator for t in batch}):
        rows = [t for t in batch if t.locator == i]
        out.append(
            _Group(
                index=i,
                obs=np.stack([t.obs for t in rows]),
                actions=np.array([t.action for t in rows]),
                rewards=np.array([t.reward for t in rows], dtype=float),
                next_obs=np.stack([t.next_obs for t in rows]),
                done=np.array([t.done for t in rows], dtype=float),
                g=mask_own_action(np.stack([t.g for t in rows]), i, obs_dim, n_actions),
                g_next=mask_own_action(np.stack([t.g_next for t in rows]), i, obs_dim, n_actions),
            )
        )
    return out


def _policy_dist(policy: MLP, obs: np.ndarray):
    """Probabilities and log-probabilities as tape tensors."""
    logp = log_softmax(policy(Tensor(obs)), axis=-1)
    return exp(logp), logp


def critic_loss(
    batch: Sequence[Transition],
    critics: Sequence[CriticEnsemble],
    policies: Sequence[MLP],
    alpha: float,
    gamma: float,
) -> Tensor:
    """
    Sum over both critics of the batch mean of ``½(Q(g)[a] − y)²``.

    The target is ``y = r + γ (1 − done) V(g')`` with ``V`` the soft state value of the
    next local observation under the target critics' minimum.
    """
    obs_dim = policies[0].in_dim
    n_actions = policies[0].out_dim
    n = len(batch)
    total = None
    for grp in _group(batch, obs_dim, n_actions):
        crit = critics[grp.index]
        with no_grad():
            probs, logp = _policy_dist(policies[grp.index], grp.next_obs)
        v_next = soft_state_value(probs.data, logp.data, crit.min_target_q(grp.g_next), alpha)
        y = Tensor(grp.rewards + gamma * (1.0 - grp.done) * v_next)

        g = Tensor(grp.g)
        for q in (crit.q1, crit.q2):
            diff = gather(q(g), grp.actions) - y
            term = tsum(mul(diff, diff)) * (0.5 / n)
            total = term if total is None else total + term
    return total


def policy_loss(
    batch: Sequence[Transition],
    critics: Sequence[CriticEnsemble],
    policies: Sequence[MLP],
    alpha: float,
) -> Tensor:
    """Batch mean of ``π(s)ᵀ[α log π(s) − min Q(g)]``; no gradient reaches the critics."""
    obs_dim = policies[0].in_dim
    n_actions = policies[0].out_dim
    n = len(batch)
    total = None
    for grp in _group(batch, obs_dim, n_actions):
        q = Tensor(critics[grp.index].min_q(grp.g))
        probs, logp = _policy_dist(policies[grp.index], grp.obs)
        term = tsum(mul(probs, logp * alpha - q)) * (1.0 / n)
        total = term if total is None else total + term
    return total


def alpha_loss(
    batch: Sequence[Transition],
    policies: Sequence[MLP],
    temperature: Temperature,
) -> Tensor:
    """Batch mean of ``π(s)ᵀ[−α(log π(s) + H̄)]`` with ``π`` held fixed."""
    obs_dim = policies[0].in_dim
    n_actions = policies[0].out_dim
    weights = []
    for grp in _group(batch, obs_dim, n_actions):
        with no_grad():
            probs, logp = _policy_dist(policies[grp.index], grp.obs)
        weights.append(np.sum(probs.data * (logp.data + temperature.target_entropy), axis=-1))
    c = float(np.mean(np.concatenate(weights)))
    return exp(temperature.log_alpha) * (-c)


@dataclass
class LossReport:
    critic_loss: float
    policy_loss: float
    alpha_loss: float
    alpha: float


class CtdeLearner(Block):
    """
    The training-only networks of the policy stage: per-locator critics and the
    shared temperature.

    Parameters
    ----------
    n_locators, obs_dim, n_actions
        Shape of the multi-locator problem.
    rng
        Generator for critic initialisation.
    critic_layers, critic_width
        Critic depth and width.
    init_alpha, target_entropy
        Initial temperature and the entropy target ``H̄``.
    gamma, tau
        Discount factor and soft-update factor.
    """

    def __init__(
        self,
        n_locators: int,
        obs_dim: int,
        n_actions: int,
        rng: np.random.Generator,
        critic_layers: int = 5,
        critic_width: int = 512,
        init_alpha: float = 0.2,
        target_entropy: float = 0.6 * np.log(4),
        gamma: float = 0.99,
        tau: float = 0.99,
    ):
        global_dim = n_locators * (obs_dim + n_actions)
        self.critics = [
            CriticEnsemble(global_dim, n_actions, rng, critic_layers, critic_width)
            for _ in range(n_locators)
        ]
        self.temperature = Temperature(init_alpha, target_entropy)
        self._obs_dim = obs_dim
        self._n_actions = n_actions
        self._gamma = gamma
        self._tau = tau

    @property
    def gamma(self) -> float:
        return self._gamma

    @property
    def tau(self) -> float:
        return self._tau

    def critic_parameters(self) -> Dict[str, Tensor]:
        out = {}
        for i, c in enumerate(self.critics):
            out.update(c.trainable(prefix=f"critics.{i}."))
        return out

    def target_parameters(self) -> Dict[str, Tensor]:
        out = {}
        for i, c in enumerate(self.critics):
            out.update(c.q1_target.named_parameters(f"critics.{i}.q1_target."))
            out.update(c.q2_target.named_parameters(f"critics.{i}.q2_target."))
        return out


@dataclass
class SacOptimizers:
    """Fresh Adam optimizers for one policy-learning stage."""

    policy: Adam
    critic: Adam
    alpha: Adam

    @classmethod
    def create(cls, model, learner: CtdeLearner, lr_policy, lr_critic, lr_alpha):
        return cls(
            policy=Adam(model.policy_parameters(), lr_policy),
            critic=Adam(learner.critic_parameters(), lr_critic),
            alpha=Adam({"log_alpha": learner.temperature.log_alpha}, lr_alpha),
        )


def _step(loss_fn, optimizer: Adam) -> float:
    optimizer.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    backward(loss, tape)
    optimizer.step()
    return loss.item()


def ctde_train_step(
    buffer: ReplayBuffer,
    model,
    learner: CtdeLearner,
    optimizers: SacOptimizers,
    batch_size: int = 64,
) -> LossReport:
    """
    One centralized update: critics, then every policy, then ``α``, then targets.

    Critics see only global snapshots; policies see only their local observations.

    Raises
    ------
    ReplayUnderfilledError
        If the buffer holds fewer than ``batch_size`` transitions.
    """
    batch = buffer.sample(batch_size)
    policies = model.policies
    temp = learner.temperature

    lc = _step(
        lambda: critic_loss(batch, learner.critics, policies, temp.alpha, learner.gamma),
        optimizers.critic,
    )
    lp = _step(lambda: policy_loss(batch, learner.critics, policies, temp.alpha), optimizers.policy)
    la = _step(lambda: alpha_loss(batch, policies, temp), optimizers.alpha)

    for c in learner.critics:
        c.update_targets(learner.tau)

    report = LossReport(lc, lp, la, temp.alpha)
    logger.debug(
        f"sac step: critic={lc:.4g} policy={lp:.4g} alpha_loss={la:.4g} alpha={temp.alpha:.4g}"
    )
    return report
