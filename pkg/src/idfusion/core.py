"""Shared domain types and ranking/normalization primitives.

Everything downstream (subject scoring, fusion, evaluation) works on
per-sample confidence vectors: one float per enrolled subject, rescaled
into [0, 1] at ingestion so that scores from different models are
commensurate. This module owns that contract plus the deterministic
ranking used everywhere a "top n predictions" notion appears.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ValidationError",
    "DegenerateVectorWarning",
    "RankedPrediction",
    "ConfidenceMatrix",
    "PairedDataset",
    "as_confidence_vector",
    "as_label_vector",
    "rank_top_n",
    "minmax_normalize",
    "minmax_normalize_rows",
    "descending_order",
]


class ValidationError(ValueError):
    """Input data violates a documented contract (bad shape, range, or value)."""


class DegenerateVectorWarning(UserWarning):
    """A constant vector was normalized; the result carries no ranking information."""


def as_confidence_vector(values, *, name: str = "confidence vector") -> np.ndarray:
    """Validate and return a 1-D float64 confidence vector.

    Requires length >= 2, finite entries, and values already inside [0, 1]
    (ingestion normalization is the caller's job; see ``minmax_normalize``).
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got shape {v.shape}")
    if v.size < 2:
        raise ValidationError(f"{name} needs at least 2 entries, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} contains NaN or infinite entries")
    if v.min() < 0.0 or v.max() > 1.0:
        raise ValidationError(
            f"{name} has values outside [0, 1] (min={v.min()}, max={v.max()}); "
            "normalize before use"
        )
    return v


def as_label_vector(labels, num_classes: int, *, name: str = "labels") -> np.ndarray:
    """Validate and return a 1-D int64 label vector with entries in [0, num_classes)."""
    y = np.asarray(labels)
    if y.ndim != 1:
        raise ValidationError(f"{name} must be 1-D, got shape {y.shape}")
    if y.size == 0:
        raise ValidationError(f"{name} is empty")
    if not np.issubdtype(y.dtype, np.integer):
        yf = np.asarray(labels, dtype=np.float64)
        if not np.all(yf == np.floor(yf)):
            raise ValidationError(f"{name} must contain integers")
        y = yf.astype(np.int64)
    else:
        y = y.astype(np.int64)
    if y.min() < 0 or y.max() >= num_classes:
        raise ValidationError(
            f"{name} out of range [0, {num_classes}): min={y.min()}, max={y.max()}"
        )
    return y


def descending_order(values: np.ndarray) -> np.ndarray:
    """Indices sorting ``values`` in descending order, ties broken by lower index."""
    # stable sort of the negated values keeps original order among equals,
    # which is exactly the lowest-index-first tie rule
    return np.argsort(-np.asarray(values, dtype=np.float64), kind="stable")


@dataclass(frozen=True)
class RankedPrediction:
    """Top-n class indices and their scores, best first."""

    indices: tuple[int, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.indices) != len(self.values):
            raise ValidationError("indices and values must have equal length")
        if len(set(self.indices)) != len(self.indices):
            raise ValidationError("ranked indices must be distinct")
        if any(a < b for a, b in zip(self.values, self.values[1:])):
            raise ValidationError("ranked values must be non-increasing")

    @property
    def top(self) -> int:
        return self.indices[0]


def rank_top_n(values, n: int) -> RankedPrediction:
    """Return the ``n`` highest-scoring class indices, best first.

    Ties are broken toward the lower class index so the ranking is
    deterministic and reproducible across runs.
    """
    v = as_confidence_vector(values)
    if not 1 <= n <= v.size:
        raise ValidationError(f"rank depth {n} out of range [1, {v.size}]")
    order = descending_order(v)[:n]
    return RankedPrediction(
        indices=tuple(int(i) for i in order),
        values=tuple(float(v[i]) for i in order),
    )


def minmax_normalize(values) -> np.ndarray:
    """Affinely rescale a raw score vector into [0, 1].

    Constant vectors carry no ranking information; they map to all zeros
    and emit :class:`DegenerateVectorWarning` rather than failing, so bulk
    ingestion can proceed while still flagging useless rows.
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise ValidationError(f"expected a 1-D vector, got shape {v.shape}")
    if v.size < 2:
        raise ValidationError(f"need at least 2 entries, got {v.size}")
    if not np.all(np.isfinite(v)):
        raise ValidationError("cannot normalize a vector with NaN or infinite entries")
    lo = v.min()
    hi = v.max()
    if hi == lo:
        warnings.warn(
            "constant vector normalized to all zeros; ranking is meaningless",
            DegenerateVectorWarning,
            stacklevel=2,
        )
        return np.zeros_like(v)
    return (v - lo) / (hi - lo)


def minmax_normalize_rows(matrix) -> np.ndarray:
    """Row-wise :func:`minmax_normalize` over a 2-D array of raw scores."""
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("cannot normalize a matrix with NaN or infinite entries")
    lo = m.min(axis=1, keepdims=True)
    hi = m.max(axis=1, keepdims=True)
    span = hi - lo
    degenerate = span[:, 0] == 0.0
    if degenerate.any():
        warnings.warn(
            f"{int(degenerate.sum())} constant row(s) normalized to all zeros",
            DegenerateVectorWarning,
            stacklevel=2,
        )
        span = np.where(span == 0.0, 1.0, span)
    out = (m - lo) / span
    out[degenerate] = 0.0
    return out


@dataclass(frozen=True)
class ConfidenceMatrix:
    """Per-sample confidence vectors for one modality.

    ``values`` is N x M (samples x enrolled subjects), every entry in [0, 1].
    ``sample_ids`` are unique and aligned with the rows.
    """

    values: np.ndarray
    sample_ids: tuple[str, ...]
    modality: str

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValidationError(f"confidence matrix must be 2-D, got shape {v.shape}")
        if v.shape[1] < 2:
            raise ValidationError("confidence matrix needs at least 2 classes")
        if not np.all(np.isfinite(v)):
            raise ValidationError("confidence matrix contains NaN or infinite entries")
        if v.min() < 0.0 or v.max() > 1.0:
            raise ValidationError(
                "confidence matrix has values outside [0, 1]; normalize at ingestion"
            )
        ids = tuple(str(s) for s in self.sample_ids)
        if len(ids) != v.shape[0]:
            raise ValidationError(
                f"{len(ids)} sample ids for {v.shape[0]} rows"
            )
        if len(set(ids)) != len(ids):
            raise ValidationError("sample ids must be unique")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "sample_ids", ids)

    @property
    def num_samples(self) -> int:
        return self.values.shape[0]

    @property
    def num_classes(self) -> int:
        return self.values.shape[1]

    def row(self, i: int) -> np.ndarray:
        return self.values[i]

    def take(self, indices) -> "ConfidenceMatrix":
        """Sub-matrix for the given sample positions, order preserved."""
        idx = np.asarray(indices, dtype=np.int64)
        return ConfidenceMatrix(
            values=self.values[idx].copy(),
            sample_ids=tuple(self.sample_ids[i] for i in idx),
            modality=self.modality,
        )


@dataclass(frozen=True)
class PairedDataset:
    """Aligned confidence matrices for the two modalities plus ground truth.

    Row i of both matrices and ``labels[i]`` all describe the same physical
    sample, which is what lets per-fold results combine directly.
    """

    face: ConfidenceMatrix
    ecg: ConfidenceMatrix
    labels: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.face.values.shape != self.ecg.values.shape:
            raise ValidationError(
                f"modality shapes differ: {self.face.values.shape} vs {self.ecg.values.shape}"
            )
        if self.face.sample_ids != self.ecg.sample_ids:
            raise ValidationError("modalities must cover the same samples in the same order")
        y = as_label_vector(self.labels, self.face.num_classes)
        if y.size != self.face.num_samples:
            raise ValidationError(
                f"{y.size} labels for {self.face.num_samples} samples"
            )
        y.setflags(write=False)
        object.__setattr__(self, "labels", y)

    @property
    def num_samples(self) -> int:
        return self.face.num_samples

    @property
    def num_classes(self) -> int:
        return self.face.num_classes
