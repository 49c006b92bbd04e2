"""Combining two modalities' confidences into one identification decision.

The subject-score gap between the modalities becomes a per-subject
difference vector, rescaled so its largest magnitude sits at a fixed
bound (0.20 by default). Each modality's confidences are then reweighted
elementwise by (0.5 - diff) or (0.5 + diff) — whichever side favors it —
and the two reweighted vectors are summed; the argmax of that sum is the
fused prediction. A conventional weighted-sum combiner with global,
accuracy-proportional weights is included as the baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import ValidationError, as_confidence_vector

__all__ = [
    "DifferenceVector",
    "FusionModel",
    "BaselineWeights",
    "difference_vector",
    "normalize_difference",
    "fused_scores",
    "final_score",
    "predict_fused",
    "predict_fused_batch",
    "compute_baseline_weights",
    "predict_weighted_sum",
    "predict_weighted_sum_batch",
]

DEFAULT_BOUND = 0.20


@dataclass(frozen=True)
class DifferenceVector:
    """Per-subject modality advantage, normalized to a symmetric bound.

    A positive entry means the second (plus-side) modality is the more
    reliable one for that subject. Unless the vector is identically zero,
    its largest magnitude equals ``bound`` exactly.
    """

    values: np.ndarray = field(repr=False)
    bound: float = DEFAULT_BOUND

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1:
            raise ValidationError(f"difference vector must be 1-D, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("difference vector contains NaN or infinite entries")
        if not 0.0 < self.bound < 0.5:
            raise ValidationError("bound must lie in (0, 0.5) to keep all weights positive")
        peak = np.abs(v).max() if v.size else 0.0
        if peak > self.bound:
            raise ValidationError(f"entries exceed the bound: max |d| = {peak} > {self.bound}")
        if peak != 0.0 and abs(peak - self.bound) > 1e-9:
            raise ValidationError(
                f"a nonzero difference vector must peak at the bound (got {peak})"
            )
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return self.values.size


def difference_vector(scores_plus, scores_minus) -> np.ndarray:
    """Raw elementwise gap between two subject-score vectors.

    Positive entries favor the first argument. For the face/ECG pairing
    used throughout, call as ``difference_vector(s_ecg, s_face)``.
    """
    a = np.asarray(scores_plus, dtype=np.float64)
    b = np.asarray(scores_minus, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(f"score vectors must be equal-length 1-D, got {a.shape} and {b.shape}")
    return a - b


def normalize_difference(raw, bound: float = DEFAULT_BOUND) -> DifferenceVector:
    """Rescale a raw difference vector so its peak magnitude equals ``bound``.

    Rescaling (rather than clipping) preserves the relative ordering of all
    entries. An all-zero input stays all zeros.
    """
    v = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValidationError("difference vector contains NaN or infinite entries")
    peak = np.abs(v).max() if v.size else 0.0
    if peak == 0.0:
        return DifferenceVector(values=v.copy(), bound=bound)
    # divide by the peak first: no overflow for tiny vectors, and the peak
    # entry maps to exactly +-1 and hence exactly +-bound
    scaled = (v / peak) * bound
    return DifferenceVector(values=scaled, bound=bound)


@dataclass(frozen=True)
class FusionModel:
    """A trained fusion rule: the difference vector plus the modality order.

    ``modality_order`` is (minus_tag, plus_tag): the first modality is
    weighted by (0.5 - d), the second by (0.5 + d).
    """

    difference: DifferenceVector
    modality_order: tuple[str, str] = ("face", "ecg")

    def __post_init__(self):
        if len(self.modality_order) != 2 or self.modality_order[0] == self.modality_order[1]:
            raise ValidationError("modality_order must be two distinct tags")

    @property
    def num_classes(self) -> int:
        return len(self.difference)

    def weights(self, modality: str) -> np.ndarray:
        """Elementwise weight vector (0.5 -+ d) for the given modality tag."""
        d = self.difference.values
        if modality == self.modality_order[0]:
            return 0.5 - d
        if modality == self.modality_order[1]:
            return 0.5 + d
        raise ValidationError(f"unknown modality {modality!r}; model has {self.modality_order}")


def fused_scores(confidences, diff: DifferenceVector, sign: int) -> np.ndarray:
    """Reweight one modality's confidences by (0.5 + sign * d) elementwise.

    ``sign`` is +1 for the modality the difference vector favors when
    positive, -1 for the other one.
    """
    c = as_confidence_vector(confidences)
    if sign not in (+1, -1):
        raise ValidationError("sign must be +1 or -1")
    d = diff.values
    if c.shape != d.shape:
        raise ValidationError(f"length mismatch: {c.size} confidences vs {d.size} differences")
    return c * (0.5 + sign * d)


def final_score(f_first, f_second) -> np.ndarray:
    """Elementwise sum of the two reweighted score vectors."""
    a = np.asarray(f_first, dtype=np.float64)
    b = np.asarray(f_second, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError(f"fused vectors must be equal-length 1-D, got {a.shape} and {b.shape}")
    return a + b


def predict_fused(c_face, c_ecg, model: FusionModel) -> int:
    """Fused class decision for one sample; ties go to the lower index."""
    f_face = fused_scores(c_face, model.difference, -1)
    f_ecg = fused_scores(c_ecg, model.difference, +1)
    total = final_score(f_face, f_ecg)
    return int(np.argmax(total))


def predict_fused_batch(face_values: np.ndarray, ecg_values: np.ndarray, model: FusionModel) -> np.ndarray:
    """Row-wise fused decisions over aligned N x M confidence matrices."""
    if face_values.shape != ecg_values.shape:
        raise ValidationError(
            f"modality shapes differ: {face_values.shape} vs {ecg_values.shape}"
        )
    d = model.difference.values
    if face_values.shape[1] != d.size:
        raise ValidationError(
            f"model has {d.size} classes but matrices have {face_values.shape[1]}"
        )
    total = face_values * (0.5 - d) + ecg_values * (0.5 + d)
    return np.argmax(total, axis=1)


@dataclass(frozen=True)
class BaselineWeights:
    """Global convex weights for the weighted-sum baseline."""

    w_face: float
    w_ecg: float

    def __post_init__(self):
        if not (0.0 <= self.w_face <= 1.0 and 0.0 <= self.w_ecg <= 1.0):
            raise ValidationError("weights must lie in [0, 1]")
        if abs(self.w_face + self.w_ecg - 1.0) > 1e-9:
            raise ValidationError(f"weights must sum to 1, got {self.w_face + self.w_ecg}")


def compute_baseline_weights(train_acc_face: float, train_acc_ecg: float) -> BaselineWeights:
    """Accuracy-proportional weights, normalized to sum to 1."""
    if not (0.0 <= train_acc_face <= 1.0 and 0.0 <= train_acc_ecg <= 1.0):
        raise ValidationError("accuracies must lie in [0, 1]")
    total = train_acc_face + train_acc_ecg
    if total == 0.0:
        raise ValidationError("cannot derive weights when both accuracies are zero")
    return BaselineWeights(w_face=train_acc_face / total, w_ecg=train_acc_ecg / total)


def predict_weighted_sum(c_face, c_ecg, weights: BaselineWeights) -> int:
    """Weighted-sum class decision for one sample; ties go to the lower index."""
    a = as_confidence_vector(c_face)
    b = as_confidence_vector(c_ecg)
    if a.shape != b.shape:
        raise ValidationError(f"length mismatch: {a.size} vs {b.size}")
    return int(np.argmax(weights.w_face * a + weights.w_ecg * b))


def predict_weighted_sum_batch(
    face_values: np.ndarray, ecg_values: np.ndarray, weights: BaselineWeights
) -> np.ndarray:
    """Row-wise weighted-sum decisions over aligned N x M confidence matrices."""
    if face_values.shape != ecg_values.shape:
        raise ValidationError(
            f"modality shapes differ: {face_values.shape} vs {ecg_values.shape}"
        )
    return np.argmax(weights.w_face * face_values + weights.w_ecg * ecg_values, axis=1)
