"""Video-level classification metrics."""
import warnings
from typing import Optional, Sequence

import numpy as np


def top1_accuracy(preds: np.ndarray, labels: Sequence[int]) -> float:
    """
    Fraction of rows whose argmax equals the label.

    Ties resolve to the lowest class index (``np.argmax`` semantics).
    """
    preds = np.asarray(preds)
    labels = np.asarray(labels)
    if preds.ndim != 2 or len(preds) == 0:
        raise ValueError("top1_accuracy needs a non-empty (n_videos, n_classes) array")
    if len(labels) != len(preds):
        raise ValueError(f"{len(preds)} predictions but {len(labels)} labels")
    return float(np.mean(np.argmax(preds, axis=1) == labels))


def average_precision(scores: Sequence[float], positives: Sequence[bool]) -> float:
    """
    Average precision of a ranking by descending score.

    Videos with equal scores keep their input order, so the result depends on tie
    order exactly as a stable sort does.
    """
    scores = np.asarray(scores, dtype=float)
    positives = np.asarray(positives, dtype=bool)
    n_pos = positives.sum()
    if n_pos == 0:
        raise ValueError("average precision is undefined without a positive")
    order = np.argsort(-scores, kind="stable")
    hits = positives[order]
    ranks = np.flatnonzero(hits) + 1
    return float(np.mean(np.arange(1, n_pos + 1) / ranks))


def mean_average_precision(
    scores: np.ndarray, labels: Sequence[int], n_classes: Optional[int] = None
) -> float:
    """
    Unweighted mean of one-vs-rest average precision over classes with a positive.

    Parameters
    ----------
    scores
        ``(n_videos, n_classes)`` class probabilities (or any monotone scores).
    labels
        True class per video.
    n_classes
        Number of classes; defaults to ``scores.shape[1]``.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.ndim != 2 or len(scores) != len(labels) or len(scores) == 0:
        raise ValueError("scores must be (n_videos, n_classes) matching labels")
    n_classes = n_classes or scores.shape[1]

    aps = []
    skipped = []
    for c in range(n_classes):
        pos = labels == c
        if not pos.any():
            skipped.append(c)
            continue
        aps.append(average_precision(scores[:, c], pos))

    if not aps:
        raise ValueError("no class has a positive example")
    if skipped:
        warnings.warn(f"classes {skipped} have no positives and were left out of mAP")
    return float(np.mean(aps))
