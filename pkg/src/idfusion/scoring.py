"""Per-subject reliability scores learned from training-set confidences.

For every enrolled subject the score accumulates, over the training
samples, how decisively the model identifies that subject:

* a sample whose true subject is ranked first earns the full 1.0 award;
* a true subject ranked 2..rank_depth earns 1.0 minus the confidence gap
  between the top prediction and the true one;
* a true subject outside the top rank_depth earns nothing;
* whichever subject the model (wrongly) put on top is penalized by that
  same gap, and its running score is clamped at the floor immediately.

The final vector is divided by the per-class sample count so a perfectly
identified subject scores exactly 1.0 on a balanced training set.

The clamp makes the loop stateful: the running score of a frequently
confused subject saturates at the floor instead of going arbitrarily
negative, so samples must be consumed in their given order.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import ConfidenceMatrix, ValidationError, as_confidence_vector, as_label_vector

__all__ = ["ScoringConfig", "conf_diff", "compute_subject_scores"]


@dataclass(frozen=True)
class ScoringConfig:
    """Knobs for subject scoring.

    ``samples_per_class`` is the normalizer N/M of the training set; the
    caller supplies it (exact for balanced sets, a real-valued average
    otherwise). ``rank_depth`` is how deep the ranked predictions are
    searched for the true subject before the sample counts as a miss.
    """

    samples_per_class: float
    rank_depth: int = 5
    clamp_floor: float = 0.0

    def __post_init__(self):
        if self.samples_per_class <= 0:
            raise ValidationError("samples_per_class must be positive")
        if self.rank_depth < 1:
            raise ValidationError("rank_depth must be >= 1")


def conf_diff(confidences, true_label: int, rank_depth: int = 5) -> float:
    """Confidence gap between the top prediction and the true subject.

    Returns 0.0 when the true subject is ranked first, the top-minus-true
    score difference when it sits at rank 2..rank_depth, and 1.0 when it is
    absent from the top rank_depth entirely. Inputs must already be
    normalized to [0, 1] so the 1.0 miss penalty is commensurate with the
    score gaps.
    """
    c = as_confidence_vector(confidences)
    if not 0 <= true_label < c.size:
        raise ValidationError(f"true_label {true_label} out of range [0, {c.size})")
    if not 1 <= rank_depth <= c.size:
        raise ValidationError(f"rank_depth {rank_depth} out of range [1, {c.size}]")
    order = np.argsort(-c, kind="stable")
    rank = int(np.nonzero(order == true_label)[0][0])  # 0-based rank of the true class
    if rank == 0:
        return 0.0
    if rank < rank_depth:
        gap = float(c[order[0]] - c[true_label])
        return min(max(gap, 0.0), 1.0)
    return 1.0


def _gaps_and_predictions(
    values: np.ndarray, labels: np.ndarray, rank_depth: int
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized per-sample confidence gaps and top predictions.

    The gap of a sample depends only on its own row, so this part can be
    batched; only the score updates below are order-dependent.
    """
    n, m = values.shape
    order = np.argsort(-values, axis=1, kind="stable")
    ranks = np.empty((n, m), dtype=np.int64)
    rows = np.arange(n)[:, None]
    ranks[rows, order] = np.arange(m)[None, :]
    true_rank = ranks[np.arange(n), labels]
    top = order[:, 0]
    gap = values[np.arange(n), top] - values[np.arange(n), labels]
    gap = np.clip(gap, 0.0, 1.0)
    out = np.where(true_rank == 0, 0.0, np.where(true_rank < rank_depth, gap, 1.0))
    return out, top


def compute_subject_scores(
    confidences, labels, cfg: ScoringConfig
) -> np.ndarray:
    """Run the award/punish scoring loop over a training set.

    ``confidences`` may be a :class:`ConfidenceMatrix` or a plain N x M
    array with values in [0, 1]; ``labels`` gives the true class per row.
    Returns the length-M subject score vector.
    """
    if isinstance(confidences, ConfidenceMatrix):
        values = confidences.values
    else:
        values = np.asarray(confidences, dtype=np.float64)
        if values.ndim != 2:
            raise ValidationError(f"expected an N x M matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("confidence matrix contains NaN or infinite entries")
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise ValidationError("confidences must be normalized to [0, 1]")
    if values.shape[0] == 0:
        raise ValidationError("cannot score an empty training set")
    n, m = values.shape
    y = as_label_vector(labels, m)
    if y.size != n:
        raise ValidationError(f"{y.size} labels for {n} samples")
    if cfg.rank_depth > m:
        raise ValidationError(f"rank_depth {cfg.rank_depth} exceeds class count {m}")

    counts = np.bincount(y, minlength=m)
    if counts.min() != counts.max():
        warnings.warn(
            "unbalanced class counts: the samples_per_class normalizer is approximate",
            UserWarning,
            stacklevel=2,
        )

    gaps, top = _gaps_and_predictions(values, y, cfg.rank_depth)

    scores = [0.0] * m
    floor = cfg.clamp_floor
    # Input order is part of the contract: the clamp couples consecutive
    # updates to the same subject, so this loop must not be reordered.
    for i in range(n):
        d = float(gaps[i])
        scores[y[i]] += 1.0 - d
        p = top[i]
        scores[p] -= d
        if scores[p] < floor:
            scores[p] = floor
    return np.asarray(scores, dtype=np.float64) / cfg.samples_per_class
