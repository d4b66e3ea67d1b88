"""
Reading and writing VIMF frame-feature files, and batching of samples.

A VIMF file is little-endian: magic ``VIMF``, then u32 version (1), T, d, label and
number of classes, then ``T·d`` f32 values in row-major order.
"""
import logging
import struct
from pathlib import Path
from typing import Iterator, List, Sequence, Union

import numpy as np

from .synthetic import DatasetSplit, VideoSample

logger = logging.getLogger(__name__)

MAGIC = b"VIMF"
VERSION = 1
_HEADER = struct.Struct("<4sIIIII")


class FeatureFileError(ValueError):
    pass


def write_feature_file(path: Union[str, Path], sample: VideoSample, num_classes: int):
    if not 0 <= sample.label < num_classes:
        raise FeatureFileError(f"label {sample.label} out of range for {num_classes} classes")
    T, d = sample.features.shape
    with open(path, "wb") as fl:
        fl.write(_HEADER.pack(MAGIC, VERSION, T, d, sample.label, num_classes))
        fl.write(np.ascontiguousarray(sample.features, dtype="<f4").tobytes())


def load_feature_file(path: Union[str, Path]) -> VideoSample:
    """
    Parse one VIMF file into a :class:`VideoSample` (without unit annotations).

    The video id is the file stem.

    Raises
    ------
    FeatureFileError
        On a bad magic, version mismatch, malformed header, truncated payload or a
        label outside the declared class count.
    """
    path = Path(path)
    buf = path.read_bytes()
    if len(buf) < _HEADER.size:
        raise FeatureFileError(f"{path}: file shorter than the VIMF header")
    magic, version, T, d, label, n_classes = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FeatureFileError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FeatureFileError(f"{path}: version {version} is not supported (expected {VERSION})")
    if T == 0 or d == 0 or n_classes == 0:
        raise FeatureFileError(f"{path}: malformed header (T={T}, d={d}, C={n_classes})")
    if label >= n_classes:
        raise FeatureFileError(f"{path}: label {label} >= declared class count {n_classes}")
    expected = _HEADER.size + 4 * T * d
    if len(buf) < expected:
        raise FeatureFileError(f"{path}: truncated payload ({len(buf)} of {expected} bytes)")
    if len(buf) > expected:
        raise FeatureFileError(f"{path}: {len(buf) - expected} trailing bytes")

    feats = np.frombuffer(buf, dtype="<f4", count=T * d, offset=_HEADER.size)
    try:
        return VideoSample(
            feats.reshape(T, d).astype(np.float64),
            int(label),
            video_id=path.stem,
            num_classes=int(n_classes),
        )
    except ValueError as e:
        raise FeatureFileError(f"{path}: {e}")


def _load_many(directory: Path) -> List[VideoSample]:
    files = sorted(directory.glob("*.vimf"))
    if not files:
        raise FeatureFileError(f"no .vimf files found in {directory}")
    return [load_feature_file(f) for f in files]


def load_feature_dir(directory: Union[str, Path]) -> DatasetSplit:
    """Load ``<directory>/train/*.vimf`` and ``<directory>/test/*.vimf`` (sorted by name)."""
    directory = Path(directory)
    train = _load_many(directory / "train")
    test = _load_many(directory / "test")
    classes = {s.num_classes for s in train + test}
    if len(classes) != 1:
        raise FeatureFileError(f"{directory}: files declare different class counts {classes}")
    # Ids are file stems; prefix them so equal names in both splits stay disjoint.
    for s in train:
        s.video_id = f"train/{s.video_id}"
    for s in test:
        s.video_id = f"test/{s.video_id}"
    logger.info(f"loaded {len(train)} train and {len(test)} test videos from {directory}")
    return DatasetSplit(train, test, classes.pop())


def write_feature_dir(directory: Union[str, Path], split: DatasetSplit) -> int:
    """Write a split in the layout read by :func:`load_feature_dir`. Returns the file count."""
    directory = Path(directory)
    n = 0
    for name, samples in (("train", split.train), ("test", split.test)):
        sub = directory / name
        sub.mkdir(parents=True, exist_ok=True)
        for i, s in enumerate(samples):
            write_feature_file(sub / f"{i:05d}.vimf", s, split.num_classes)
            n += 1
    return n


def batch_iter(
    samples: Sequence[VideoSample],
    batch_size: int,
    seed: int = 0,
    shuffle: bool = True,
    epoch: int = 0,
) -> Iterator[List[VideoSample]]:
    """
    Yield consecutive batches covering every sample exactly once.

    The shuffle order is drawn from a generator seeded with ``(seed, epoch)``, so
    different epochs see different permutations and each is reproducible.
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if not samples:
        raise ValueError("cannot iterate over an empty split")
    order = np.arange(len(samples))
    if shuffle:
        order = np.random.default_rng([seed, epoch]).permutation(len(samples))
    for lo in range(0, len(samples), batch_size):
        yield [samples[i] for i in order[lo : lo + batch_size]]
