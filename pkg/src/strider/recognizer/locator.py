"""
Local unit locators: the movement state machine over the frame axis.

A locator starts at its placement frame, observes it, and then alternates between
a policy decision (stop, or move forward by ``k·δ`` frames) and observing the frame
it lands on. It stops when it chooses to, when it moves past the last frame (or past
its region when fenced), or when it has made ``max_moves`` observations.

All locators of a video advance in lockstep: at every step each active locator
decides, then moves, then observes. The shared reward of a step needs every
locator's context at that step, so the step is a barrier.
"""
import logging
import re
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import Tensor, no_grad, softmax
from ..data import VideoSample
from ..metrics.cost import RunTrace
from .spatial import SpatialEncoder, encode_frame
from .temporal import TemporalNet, TemporalState

logger = logging.getLogger(__name__)


class LocatorStoppedError(RuntimeError):
    pass


class ActionSpace:
    """
    Strides ``{0, δ, 2δ, 3δ}``; action ``k`` moves ``k·δ`` frames and ``k = 0`` stops.

    Parameters
    ----------
    delta
        The minimum moving stride, in frames.
    n_actions
        Number of actions, including the stop action.
    """

    def __init__(self, delta: int = 3, n_actions: int = 4):
        if delta < 1:
            raise ValueError(f"delta must be >= 1, got {delta}")
        if n_actions < 2:
            raise ValueError("an action space needs the stop action and one move")
        self.delta = delta
        self.n_actions = n_actions

    @property
    def strides(self) -> Tuple[int, ...]:
        return tuple(k * self.delta for k in range(self.n_actions))

    def stride(self, k: int) -> int:
        if not (isinstance(k, (int, np.integer)) and 0 <= k < self.n_actions):
            raise ValueError(f"invalid action {k!r}; expected one of 0..{self.n_actions - 1}")
        return int(k) * self.delta

    def __repr__(self):
        return f"ActionSpace(strides={set(self.strides)})"


@dataclass
class LocatorState:
    """Mutable state of one locator for one video."""

    index: int
    start: int
    region_end: int
    max_moves: int
    position: int
    temporal: TemporalState
    steps_taken: int = 0
    n_selected: int = 0
    stopped: bool = False
    observed: List[int] = field(default_factory=list)

    @property
    def hidden(self) -> Tensor:
        """The current context ``h``; frozen once the locator has stopped."""
        return self.temporal.context


def init_locators(
    n_locators: int,
    n_frames: int,
    max_moves: int,
    temporal: Optional[TemporalNet] = None,
) -> List[LocatorState]:
    """
    Place ``n_locators`` locators uniformly, locator ``i`` at ``floor(i·T/N)``.

    Locator ``i`` owns the region ``[floor(i·T/N), floor((i+1)·T/N))``.
    """
    if not 1 <= n_locators <= n_frames:
        raise ValueError(f"need 1 <= n_locators <= n_frames, got {n_locators} and {n_frames}")
    if max_moves < 1:
        raise ValueError("max_moves must be >= 1")

    states = []
    for i in range(n_locators):
        start = (i * n_frames) // n_locators
        init = temporal.initial_state() if temporal is not None else TemporalState(Tensor([]))
        states.append(
            LocatorState(
                index=i,
                start=start,
                region_end=((i + 1) * n_frames) // n_locators,
                max_moves=max_moves,
                position=start,
                temporal=init,
            )
        )
    return states


def mark_observed(state: LocatorState, n_frames: int) -> LocatorState:
    """Validate the locator's position and count an observation there."""
    if state.stopped:
        raise LocatorStoppedError(f"locator {state.index} observed after stopping")
    if not 0 <= state.position < n_frames:
        raise ValueError(f"locator {state.index}: position {state.position} outside the video")
    if state.observed and state.position <= state.observed[-1]:
        raise ValueError(f"locator {state.index}: non-increasing position {state.position}")
    state.steps_taken += 1
    state.n_selected += 1
    state.observed.append(state.position)
    return state


def observe(
    state: LocatorState,
    frames: np.ndarray,
    encoder: SpatialEncoder,
    temporal: TemporalNet,
    trace: Optional[RunTrace] = None,
) -> LocatorState:
    """Encode the frame at the locator's position and advance its context."""
    mark_observed(state, len(frames))
    e = encode_frame(encoder, Tensor(frames[state.position]), trace)
    state.temporal = temporal.step(e, state.temporal)
    if trace is not None:
        trace.charge_temporal()
    return state


def policy_observation(state: LocatorState) -> np.ndarray:
    """The local observation ``h ⊕ n/m`` seen by the locator's policy."""
    return np.concatenate([state.hidden.data, [state.n_selected / state.max_moves]])


def decide(state: LocatorState, policy: Callable[[Tensor], Tensor]) -> np.ndarray:
    """
    The locator's action distribution, read from its own state only.

    Raises
    ------
    LocatorStoppedError
        If the locator has stopped.
    ValueError
        If the locator already made ``max_moves`` observations (it must be forced to
        stop instead).
    """
    if state.stopped:
        raise LocatorStoppedError(f"locator {state.index} asked to decide after stopping")
    if state.steps_taken >= state.max_moves:
        raise ValueError(
            f"locator {state.index} reached max_moves={state.max_moves}; it must stop"
        )
    with no_grad():
        return softmax(policy(Tensor(policy_observation(state)))).data


def apply_action(
    state: LocatorState, k: int, space: ActionSpace, n_frames: int, fence: bool = False
) -> LocatorState:
    """
    Stop (``k = 0``) or move forward ``k·δ`` frames.

    A move landing at or past the last frame (or the region end, when fenced) stops
    the locator where it is: there is no clamping and no wraparound.
    """
    stride = space.stride(k)
    if state.stopped:
        raise LocatorStoppedError(f"locator {state.index} acted after stopping")
    if stride == 0:
        state.stopped = True
        return state

    limit = state.region_end if fence else n_frames
    if state.position + stride >= limit:
        state.stopped = True
    else:
        state.position += stride
    return state


_MODE = re.compile(r"^(uniform|random)(\d{1,3})$")


def parse_mode(mode: str) -> Tuple[str, float]:
    """Split a sampling mode into its kind and its frame fraction.

    ``"uniform25"`` is ``("uniform", 0.25)``; adaptive modes have fraction 0.
    """
    if mode in ("sample", "argmax"):
        return mode, 0.0
    if mode == "all":
        return "all", 1.0
    match = _MODE.match(mode)
    if match is None or not 0 < int(match.group(2)) <= 100:
        raise ValueError(
            f"unknown mode '{mode}'. Use sample, argmax, all, uniform<pct> or random<pct>"
        )
    return match.group(1), int(match.group(2)) / 100


def baseline_frames(
    kind: str, fraction: float, start: int, end: int, rng: Optional[np.random.Generator]
) -> List[int]:
    """Frames a fixed-budget strategy observes in the region ``[start, end)``.

    The count is ``round(fraction · length)`` (at least one). The region's first frame
    is always included.
    """
    length = end - start
    count = min(length, max(1, int(np.floor(fraction * length + 0.5))))
    if kind == "all" or count == length:
        return list(range(start, end))
    if kind == "uniform":
        return [start + (j * length) // count for j in range(count)]
    if rng is None:
        raise ValueError("random sampling needs a generator")
    rest = rng.choice(np.arange(start + 1, end), size=count - 1, replace=False)
    return [start] + sorted(int(r) for r in rest)


@dataclass
class TrajectoryRow:
    video_id: str
    locator: int
    t: int
    position: int
    action: int = -1
    stopped: bool = False


@dataclass
class StepLog:
    """What happened at one lockstep step.

    ``obs_pre`` and ``obs_post`` hold every locator's policy observation before the
    decisions and after the observations of the step; ``actions`` is -1 for
    locators that did not act.
    """

    step: int
    obs_pre: List[np.ndarray]
    actions: List[int]
    obs_post: List[np.ndarray]
    done: List[bool]
    frames_new: int
    frames_total: int

    @property
    def acted(self) -> List[int]:
        return [i for i, a in enumerate(self.actions) if a >= 0]


@dataclass
class Episode:
    """The outcome of running every locator over one video."""

    video_id: str
    label: int
    states: List[LocatorState]
    steps: List[StepLog]
    trajectory: List[TrajectoryRow]

    @property
    def units(self) -> List[Tensor]:
        """Unit embeddings ``h_1 … h_N``."""
        return [s.hidden for s in self.states]

    @property
    def frames(self) -> int:
        return sum(s.n_selected for s in self.states)

    @property
    def observed(self) -> List[List[int]]:
        return [list(s.observed) for s in self.states]


def _observe_logged(state, video, model, trace, rows):
    observe(state, video.features, model.spatial, model.temporal, trace)
    rows.append(TrajectoryRow(video.video_id, state.index, state.steps_taken, state.position))


def _run_baseline(video, model, kind, fraction, rng, trace) -> Episode:
    states = init_locators(model.n_locators, video.n_frames, model.max_moves, model.temporal)
    rows = []
    for state in states:
        for pos in baseline_frames(kind, fraction, state.start, state.region_end, rng):
            state.position = pos
            _observe_logged(state, video, model, trace, rows)
        state.stopped = True
        rows[-1].stopped = True
    return Episode(video.video_id, video.label, states, [], rows)


def run_episode(
    video: VideoSample,
    model,
    mode: str = "argmax",
    rng: Optional[np.random.Generator] = None,
    trace: Optional[RunTrace] = None,
    on_step: Optional[Callable[[int, Sequence[LocatorState]], None]] = None,
) -> Episode:
    """
    Run all locators of ``model`` over one video.

    Parameters
    ----------
    video
        The video to recognise.
    model
        A :class:`~strider.recognizer.model.RecognitionModel`.
    mode
        ``"sample"`` draws actions from the policies, ``"argmax"`` takes the most
        probable action; ``"all"``, ``"uniform<pct>"`` and ``"random<pct>"`` observe a
        fixed fraction of each locator's region instead.
    rng
        Generator for sampled actions and random baselines.
    trace
        Optional cost counters.
    on_step
        Called as ``on_step(step, states)`` after the initial observations
        (``step = 0``) and after every lockstep step of an adaptive episode.

    Returns
    -------
    Episode
        Every locator's final state (whose contexts are the unit embeddings), the
        per-step logs and the trajectory rows.
    """
    kind, fraction = parse_mode(mode)
    if kind == "sample" and rng is None:
        raise ValueError("sample mode needs a generator")

    if kind not in ("sample", "argmax"):
        episode = _run_baseline(video, model, kind, fraction, rng, trace)
        if trace is not None:
            trace.charge_video()
        return episode

    T = video.n_frames
    states = init_locators(model.n_locators, T, model.max_moves, model.temporal)
    rows: List[TrajectoryRow] = []
    last_row = {}
    for s in states:
        _observe_logged(s, video, model, trace, rows)
        last_row[s.index] = rows[-1]
        if s.steps_taken >= s.max_moves:
            s.stopped = True
            rows[-1].stopped = True

    steps = []
    frames_total = sum(s.n_selected for s in states)
    if on_step is not None:
        on_step(0, states)

    step = 0
    while not all(s.stopped for s in states):
        step += 1
        obs_pre = [policy_observation(s) for s in states]
        actions = [-1] * len(states)
        for s in states:
            if s.stopped:
                continue
            probs = decide(s, model.policies[s.index])
            if trace is not None:
                trace.charge_policy()
            if kind == "sample":
                actions[s.index] = int(rng.choice(len(probs), p=probs))
            else:
                actions[s.index] = int(np.argmax(probs))
            last_row[s.index].action = actions[s.index]

        frames_new = 0
        for s in states:
            if actions[s.index] < 0:
                continue
            apply_action(s, actions[s.index], model.action_space, T, model.region_fence)
            if step == 1 and not model.fuse_initial:
                # The initial frame was paid for and decided on; drop it from the unit.
                s.temporal = model.temporal.initial_state()
            if s.stopped:
                last_row[s.index].stopped = True
                continue
            _observe_logged(s, video, model, trace, rows)
            last_row[s.index] = rows[-1]
            frames_new += 1
            if s.steps_taken >= s.max_moves:
                s.stopped = True
                rows[-1].stopped = True

        frames_total += frames_new
        steps.append(
            StepLog(
                step=step,
                obs_pre=obs_pre,
                actions=actions,
                obs_post=[policy_observation(s) for s in states],
                done=[s.stopped for s in states],
                frames_new=frames_new,
                frames_total=frames_total,
            )
        )
        if on_step is not None:
            on_step(step, states)

    if trace is not None:
        trace.charge_video()
    return Episode(video.video_id, video.label, states, steps, rows)


def global_snapshot(observations: Sequence[np.ndarray], actions: Sequence[int], n_actions: int):
    """Concatenate every locator's local observation and one-hot action.

    A negative action (no action taken) leaves its slot at zero.
    """
    parts = []
    for obs, a in zip(observations, actions):
        onehot = np.zeros(n_actions)
        if a >= 0:
            onehot[a] = 1.0
        parts.append(obs)
        parts.append(onehot)
    return np.concatenate(parts)
