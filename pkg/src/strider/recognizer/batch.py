"""
Lockstep episodes over a batch of videos.

:func:`run_batch` runs every locator of ``B`` videos at once. The ``B·N`` locator
contexts are the rows of one batched temporal state (row ``b·N + i`` is locator
``i`` of video ``b``), so a step costs one pass through the spatial and temporal
networks and one policy call per locator ordinal, whatever the batch size. Rows
that do not observe at a step keep their state through a masked update.

Movement and bookkeeping are the per-video state machine of :mod:`.locator`:
positions, stops, step logs and trajectory rows of every video are the ones
:func:`~.locator.run_episode` produces for it. Random baselines draw their frames
in video order, so they also consume the generator exactly as a sequence of
single-video episodes does.
"""
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..autodiff import Tensor, no_grad, reshape, softmax
from ..data import VideoSample
from ..metrics.cost import RunTrace
from .locator import (
    Episode,
    LocatorState,
    StepLog,
    TrajectoryRow,
    apply_action,
    baseline_frames,
    init_locators,
    mark_observed,
    parse_mode,
)
from .spatial import encode_frames
from .temporal import TemporalState, select_state

#: ``on_step(step, units, live)``: the ``(B, N, H)`` contexts after the step, and which
#: videos took part in it.
BatchStepFn = Callable[[int, Tensor, np.ndarray], None]


@dataclass
class BatchEpisode:
    """The episodes of one batch, and their unit embeddings stacked as ``(B, N, H)``.

    ``units`` carries gradients back into the backbone when the batch ran on a tape;
    the per-video :class:`Episode` objects hold detached copies.
    """

    episodes: List[Episode]
    units: Tensor

    def __len__(self):
        return len(self.episodes)

    @property
    def frames(self) -> List[int]:
        return [ep.frames for ep in self.episodes]


class _Lockstep:
    """Shared state of the rows of one batch."""

    def __init__(self, videos: Sequence[VideoSample], model, trace: Optional[RunTrace]):
        self.videos = list(videos)
        self.model = model
        self.trace = trace
        self.n_locators = model.n_locators
        self.states: List[LocatorState] = [
            s
            for v in self.videos
            for s in init_locators(model.n_locators, v.n_frames, model.max_moves)
        ]
        self.temporal = model.temporal.initial_state(len(self.states))
        self.rows: List[List[TrajectoryRow]] = [[] for _ in self.videos]
        self.last_row: List[Optional[TrajectoryRow]] = [None] * len(self.states)
        self._zero_frame = np.zeros(model.spatial.input_dim)

    def video_of(self, r: int) -> int:
        return r // self.n_locators

    @property
    def stopped(self) -> np.ndarray:
        return np.array([s.stopped for s in self.states])

    @property
    def units(self) -> Tensor:
        context = self.temporal.context
        return reshape(context, (len(self.videos), self.n_locators, context.shape[-1]))

    def observe(self, mask: np.ndarray):
        """Observe the current position of every row flagged in ``mask``."""
        frames = []
        for r, s in enumerate(self.states):
            if not mask[r]:
                frames.append(self._zero_frame)
                continue
            video = self.videos[self.video_of(r)]
            mark_observed(s, video.n_frames)
            frames.append(video.features[s.position])
            row = TrajectoryRow(video.video_id, s.index, s.steps_taken, s.position)
            self.rows[self.video_of(r)].append(row)
            self.last_row[r] = row

        e = encode_frames(self.model.spatial, Tensor(np.stack(frames)), mask, self.trace)
        new = self.model.temporal.step(e, self.temporal)
        self.temporal = select_state(mask, new, self.temporal)
        if self.trace is not None:
            self.trace.charge_temporal(int(np.count_nonzero(mask)))

    def stop_exhausted(self, mask: np.ndarray):
        for r in np.flatnonzero(mask):
            s = self.states[r]
            if s.steps_taken >= s.max_moves:
                s.stopped = True
                self.last_row[r].stopped = True

    def observations(self) -> np.ndarray:
        """Every row's policy observation ``h ⊕ n/m``."""
        fill = np.array([s.n_selected / s.max_moves for s in self.states])
        return np.concatenate([self.temporal.context.data, fill[:, None]], axis=1)

    def decide(self, active: np.ndarray, obs: np.ndarray) -> List[Optional[np.ndarray]]:
        """Action distributions of the active rows, one policy call per locator ordinal."""
        probs: List[Optional[np.ndarray]] = [None] * len(self.states)
        for i, policy in enumerate(self.model.policies):
            idx = [r for r in range(i, len(self.states), self.n_locators) if active[r]]
            if not idx:
                continue
            with no_grad():
                p = softmax(policy(Tensor(obs[idx])), axis=-1).data
            if self.trace is not None:
                self.trace.charge_policy(len(idx))
            for r, row in zip(idx, p):
                probs[r] = row
        return probs

    def episodes(self, steps: List[List[StepLog]]) -> List[Episode]:
        context = self.temporal.context.data
        cell = None if self.temporal.cell is None else self.temporal.cell.data
        for r, s in enumerate(self.states):
            s.temporal = TemporalState(
                Tensor(context[r]),
                None if cell is None else Tensor(cell[r]),
                int(np.asarray(self.temporal.seen)[r]),
            )
        n = self.n_locators
        return [
            Episode(v.video_id, v.label, self.states[b * n : (b + 1) * n], steps[b], self.rows[b])
            for b, v in enumerate(self.videos)
        ]


def _baseline(run: _Lockstep, kind: str, fraction: float, rng) -> List[List[StepLog]]:
    plans = [
        baseline_frames(kind, fraction, s.start, s.region_end, rng) for s in run.states
    ]
    for j in range(max(len(p) for p in plans)):
        mask = np.array([len(p) > j for p in plans])
        for r in np.flatnonzero(mask):
            run.states[r].position = plans[r][j]
        run.observe(mask)
    for r, s in enumerate(run.states):
        s.stopped = True
        run.last_row[r].stopped = True
    for rows in run.rows:
        rows.sort(key=lambda row: (row.locator, row.t))
    return [[] for _ in run.videos]


def _adaptive(run: _Lockstep, kind: str, rng, on_step: Optional[BatchStepFn]):
    model = run.model
    n, n_videos = run.n_locators, len(run.videos)
    steps: List[List[StepLog]] = [[] for _ in run.videos]

    everyone = np.ones(len(run.states), dtype=bool)
    run.observe(everyone)
    run.stop_exhausted(everyone)
    frames_total = [
        sum(s.n_selected for s in run.states[b * n : (b + 1) * n]) for b in range(n_videos)
    ]
    if on_step is not None:
        on_step(0, run.units, np.ones(n_videos, dtype=bool))

    step = 0
    while not run.stopped.all():
        step += 1
        active = ~run.stopped
        live = active.reshape(n_videos, n).any(axis=1)
        obs_pre = run.observations()
        probs = run.decide(active, obs_pre)

        actions = np.full(len(run.states), -1)
        for r in np.flatnonzero(active):
            p = probs[r]
            if kind == "sample":
                actions[r] = int(rng.choice(len(p), p=p))
            else:
                actions[r] = int(np.argmax(p))
            run.last_row[r].action = int(actions[r])

        acted = actions >= 0
        for r in np.flatnonzero(acted):
            s = run.states[r]
            n_frames = run.videos[run.video_of(r)].n_frames
            apply_action(s, int(actions[r]), model.action_space, n_frames, model.region_fence)
            if s.stopped:
                run.last_row[r].stopped = True
        if step == 1 and not model.fuse_initial:
            # The initial frame was paid for and decided on; drop it from the unit.
            initial = model.temporal.initial_state(len(run.states))
            run.temporal = select_state(acted, initial, run.temporal)

        moved = acted & ~run.stopped
        if moved.any():
            run.observe(moved)
            run.stop_exhausted(moved)

        obs_post = run.observations()
        done = run.stopped
        for b in np.flatnonzero(live):
            lo, hi = b * n, (b + 1) * n
            frames_new = int(np.count_nonzero(moved[lo:hi]))
            frames_total[b] += frames_new
            steps[b].append(
                StepLog(
                    step=step,
                    obs_pre=list(obs_pre[lo:hi]),
                    actions=[int(a) for a in actions[lo:hi]],
                    obs_post=list(obs_post[lo:hi]),
                    done=[bool(d) for d in done[lo:hi]],
                    frames_new=frames_new,
                    frames_total=frames_total[b],
                )
            )
        if on_step is not None:
            on_step(step, run.units, live)
    return steps


def run_batch(
    videos: Sequence[VideoSample],
    model,
    mode: str = "argmax",
    rng: Optional[np.random.Generator] = None,
    trace: Optional[RunTrace] = None,
    on_step: Optional[BatchStepFn] = None,
) -> BatchEpisode:
    """
    Run all locators of ``model`` over a batch of videos in lockstep.

    Parameters
    ----------
    videos
        The videos to recognise. They may differ in length but share the feature width.
    model
        A :class:`~strider.recognizer.model.RecognitionModel`.
    mode
        As for :func:`~strider.recognizer.locator.run_episode`.
    rng
        Generator for sampled actions and random baselines.
    trace
        Optional cost counters, charged exactly as the single-video episodes would be.
    on_step
        Called as ``on_step(step, units, live)`` after the initial observations
        (``step = 0``) and after every lockstep step of an adaptive batch. ``live``
        flags the videos that still had an active locator at that step; the others
        keep their units unchanged.

    Returns
    -------
    BatchEpisode
        One :class:`~strider.recognizer.locator.Episode` per video and the stacked
        unit embeddings.
    """
    if not videos:
        raise ValueError("cannot run an empty batch")
    kind, fraction = parse_mode(mode)
    if kind == "sample" and rng is None:
        raise ValueError("sample mode needs a generator")

    run = _Lockstep(videos, model, trace)
    if kind in ("sample", "argmax"):
        steps = _adaptive(run, kind, rng, on_step)
    else:
        steps = _baseline(run, kind, fraction, rng)

    if trace is not None:
        trace.charge_video(len(run.videos))
    return BatchEpisode(run.episodes(steps), run.units)
