"""
Unit-structured synthetic videos.

Each video is split into ``n_units`` contiguous spans. Every span carries one motif
(an integer in ``[0, C)``) written into a few salient frames as a fixed direction of
feature space; the video label is the sum of its motif ids modulo ``C``, so no single
unit determines the class. The remaining frames repeat the span's background with
Gaussian noise, some of them replaced by pure-noise distractors. Frames close to a
salient frame carry a fading trace of the motif (the "halo"), which gives a moving
locator local evidence that a salient frame is near.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UnitSpec:
    """The latent layout of one semantic unit: span ``[start, end)``, motif, salient frames."""

    span: Tuple[int, int]
    motif_id: int
    salient_frames: Tuple[int, ...]

    def __post_init__(self):
        start, end = self.span
        if not 0 <= start < end:
            raise ValueError(f"invalid span {self.span}")
        if not self.salient_frames:
            raise ValueError("a unit needs at least one salient frame")
        if list(self.salient_frames) != sorted(self.salient_frames) or not all(
            start <= s < end for s in self.salient_frames
        ):
            raise ValueError(f"salient frames {self.salient_frames} not sorted within {self.span}")


@dataclass
class VideoSample:
    """A ``T × d`` frame-feature sequence and its class label."""

    features: np.ndarray
    label: int
    units: Optional[Tuple[UnitSpec, ...]] = None
    video_id: str = ""
    num_classes: Optional[int] = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise ValueError(f"features must be a non-empty T x d array, got {self.features.shape}")
        if not np.all(np.isfinite(self.features)):
            raise ValueError(f"video {self.video_id}: non-finite feature values")
        if self.label < 0 or (self.num_classes is not None and self.label >= self.num_classes):
            raise ValueError(f"video {self.video_id}: label {self.label} out of range")

    @property
    def n_frames(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]


@dataclass
class DatasetSplit:
    """Disjoint train and test sets over ``num_classes`` classes."""

    train: List[VideoSample]
    test: List[VideoSample]
    num_classes: int
    seed: Optional[int] = None
    motif_directions: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        if not self.train or not self.test:
            raise ValueError("both train and test splits must be non-empty")
        for s in self.train + self.test:
            if not 0 <= s.label < self.num_classes:
                raise ValueError(f"video {s.video_id}: label {s.label} >= {self.num_classes}")
        missing = set(range(self.num_classes)) - {s.label for s in self.train}
        if missing:
            raise ValueError(f"classes {sorted(missing)} do not appear in the train split")
        ids = [s.video_id for s in self.train]
        if set(ids) & {s.video_id for s in self.test}:
            raise ValueError("train and test splits share video ids")
        dims = {s.feature_dim for s in self.train + self.test}
        if len(dims) != 1:
            raise ValueError(f"inconsistent feature widths {sorted(dims)}")

    @property
    def feature_dim(self) -> int:
        return self.train[0].feature_dim


def _spans(rng, n_frames: int, n_units: int, min_len: int) -> List[Tuple[int, int]]:
    extra = rng.multinomial(n_frames - n_units * min_len, np.ones(n_units) / n_units)
    ends = np.cumsum(min_len + extra)
    starts = np.concatenate([[0], ends[:-1]])
    return [(int(a), int(b)) for a, b in zip(starts, ends)]


def _balanced_labels(rng, n: int, n_classes: int) -> np.ndarray:
    labels = np.arange(n) % n_classes
    rng.shuffle(labels)
    return labels


def _make_video(
    rng,
    label: int,
    video_id: str,
    directions: np.ndarray,
    complement: np.ndarray,
    n_frames: int,
    n_units: int,
    salient_per_unit: int,
    noise_std: float,
    distractor_frac: float,
    halo_frames: int,
    amplitude: float,
) -> VideoSample:
    n_classes, d = directions.shape
    motifs = list(rng.integers(0, n_classes, size=n_units - 1))
    motifs.append((label - sum(motifs)) % n_classes)

    feats = np.empty((n_frames, d))
    units = []
    spans = _spans(rng, n_frames, n_units, max(2, salient_per_unit))
    for (start, end), motif in zip(spans, motifs):
        salient = np.sort(rng.choice(np.arange(start, end), size=salient_per_unit, replace=False))
        background = complement @ rng.normal(size=d) / np.sqrt(d)

        strength = np.zeros(end - start)
        for s in salient:
            dist = np.abs(np.arange(start, end) - s)
            fade = np.clip(1.0 - dist / (halo_frames + 1), 0.0, None)
            strength = np.maximum(strength, amplitude * fade)

        for j, t in enumerate(range(start, end)):
            feats[t] = background + noise_std * rng.normal(size=d)
            if strength[j] > 0:
                feats[t] += strength[j] * directions[motif]
            elif rng.random() < distractor_frac:
                feats[t] = rng.normal(size=d)

        units.append(UnitSpec((start, end), int(motif), tuple(int(s) for s in salient)))

    return VideoSample(feats, int(label), tuple(units), video_id, n_classes)


def generate_synthetic(
    n_frames: int = 120,
    feature_dim: int = 64,
    n_classes: int = 10,
    n_units: int = 3,
    salient_per_unit: int = 2,
    noise_std: float = 0.3,
    n_train: int = 2000,
    n_test: int = 500,
    seed: int = 0,
    distractor_frac: float = 0.2,
    halo_frames: int = 3,
    amplitude: float = 2.0,
) -> DatasetSplit:
    """
    Generate a deterministic train/test split of unit-structured videos.

    Parameters
    ----------
    n_frames, feature_dim, n_classes
        Frames per video ``T``, feature width ``d`` and number of classes ``C``.
    n_units
        Semantic units per video. Each needs at least ``max(2, salient_per_unit)``
        frames.
    salient_per_unit
        Salient frames per unit.
    noise_std
        Standard deviation of the per-frame Gaussian noise.
    n_train, n_test
        Split sizes. Labels are balanced within each split.
    seed
        Seed of the only random stream used.
    distractor_frac
        Probability that a frame outside every halo is replaced by pure noise.
    halo_frames
        Frames on either side of a salient frame that carry a linearly fading copy
        of the motif. 0 disables the halo.
    amplitude
        Strength of the motif direction at a salient frame.

    Returns
    -------
    DatasetSplit
        The split, with the motif directions attached for latent-oracle checks.

    Raises
    ------
    ValueError
        If the geometry is infeasible.
    """
    if salient_per_unit < 1:
        raise ValueError("salient_per_unit must be >= 1")
    if n_units < 1 or n_units * max(2, salient_per_unit) > n_frames:
        raise ValueError(
            f"infeasible geometry: {n_units} units of >= {max(2, salient_per_unit)} frames "
            f"do not fit in {n_frames} frames"
        )
    if feature_dim < n_classes:
        raise ValueError(f"feature_dim ({feature_dim}) must be >= n_classes ({n_classes})")
    if noise_std < 0 or not 0 <= distractor_frac <= 1 or halo_frames < 0:
        raise ValueError("noise_std, distractor_frac and halo_frames must be non-negative")

    rng = np.random.default_rng(seed)
    directions = np.linalg.qr(rng.normal(size=(feature_dim, n_classes)))[0].T
    complement = np.eye(feature_dim) - directions.T @ directions

    kw = dict(
        directions=directions,
        complement=complement,
        n_frames=n_frames,
        n_units=n_units,
        salient_per_unit=salient_per_unit,
        noise_std=noise_std,
        distractor_frac=distractor_frac,
        halo_frames=halo_frames,
        amplitude=amplitude,
    )
    train = [
        _make_video(rng, y, f"train-{i:05d}", **kw)
        for i, y in enumerate(_balanced_labels(rng, n_train, n_classes))
    ]
    test = [
        _make_video(rng, y, f"test-{i:05d}", **kw)
        for i, y in enumerate(_balanced_labels(rng, n_test, n_classes))
    ]
    logger.debug(f"generated {n_train}+{n_test} synthetic videos (seed={seed})")
    return DatasetSplit(train, test, n_classes, seed, directions)


def latent_oracle(sample: VideoSample, directions: np.ndarray) -> int:
    """Recover the label from the first salient frame of every unit alone."""
    if sample.units is None:
        raise ValueError("the latent oracle needs a synthetic sample")
    motifs = [
        int(np.argmax(directions @ sample.features[u.salient_frames[0]])) for u in sample.units
    ]
    return sum(motifs) % directions.shape[0]


def class_counts(samples: Sequence[VideoSample], n_classes: int) -> np.ndarray:
    return np.bincount([s.label for s in samples], minlength=n_classes)
