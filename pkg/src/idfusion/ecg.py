"""Single-lead ECG conditioning: rescale, center, align to the first R peak.

The chain prepares raw recordings for a fixed-input-length classifier:
amplitudes are min-max rescaled, the mean is removed, the first R peak is
located (R peaks being the dominant positive spikes), and the signal is
cut to a fixed-duration window starting at that peak. The emitted window
is re-centered so it is itself zero-mean. At the default 512 Hz and 4 s
window the output is always exactly 2048 samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import ValidationError

__all__ = [
    "EcgSignal",
    "PeakDetectorConfig",
    "DegenerateSignalError",
    "PeakDetectionError",
    "InsufficientDataError",
    "normalize_amplitude",
    "zero_mean",
    "find_first_r_peak",
    "gate_signal",
    "preprocess",
    "read_signal",
    "write_signal",
]

DEFAULT_SAMPLE_RATE = 512.0
DEFAULT_GATE_SECONDS = 4.0


class DegenerateSignalError(ValidationError):
    """The signal is constant and cannot be amplitude-normalized."""


class PeakDetectionError(ValidationError):
    """No qualifying R peak inside the search window."""


class InsufficientDataError(ValidationError):
    """Not enough samples after the alignment point for the requested window."""


@dataclass(frozen=True)
class EcgSignal:
    """A single-channel signal with its sampling rate."""

    samples: np.ndarray = field(repr=False)
    sample_rate: float = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1 or s.size == 0:
            raise ValidationError(f"signal must be a nonempty 1-D array, got shape {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValidationError("signal contains NaN or infinite samples")
        if self.sample_rate <= 0:
            raise ValidationError("sample rate must be positive")
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_seconds(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class PeakDetectorConfig:
    """Threshold-fraction peak detector settings.

    Both defaults are implementation choices: a peak qualifies when it
    reaches ``threshold_fraction`` of the signal's global maximum, and only
    the first ``search_window_seconds`` of the signal are searched.
    """

    threshold_fraction: float = 0.8
    search_window_seconds: float = 1.5

    def __post_init__(self):
        if not 0.0 < self.threshold_fraction < 1.0:
            raise ValidationError("threshold_fraction must lie in (0, 1)")
        if self.search_window_seconds <= 0:
            raise ValidationError("search window must be positive")


def normalize_amplitude(sig: EcgSignal) -> EcgSignal:
    """Min-max rescale the samples into [0, 1]."""
    s = sig.samples
    lo, hi = s.min(), s.max()
    if hi == lo:
        raise DegenerateSignalError("constant signal cannot be amplitude-normalized")
    return replace(sig, samples=(s - lo) / (hi - lo))


def zero_mean(sig: EcgSignal) -> EcgSignal:
    """Subtract the mean so the signal is centered at zero."""
    return replace(sig, samples=sig.samples - sig.samples.mean())


def _plateau_peaks(s: np.ndarray) -> np.ndarray:
    """Indices of strict local maxima; a flat-topped peak reports its first sample."""
    d = np.diff(s)
    nz = np.nonzero(d)[0]
    if nz.size < 2:
        return np.empty(0, dtype=np.int64)
    rising = d[nz[:-1]] > 0
    falling = d[nz[1:]] < 0
    return nz[:-1][rising & falling] + 1


def find_first_r_peak(sig: EcgSignal, cfg: PeakDetectorConfig = PeakDetectorConfig()) -> int:
    """Index of the first R peak.

    The first local maximum inside the search window whose amplitude
    reaches ``threshold_fraction`` of the signal's global maximum.
    """
    s = sig.samples
    window = int(round(cfg.search_window_seconds * sig.sample_rate))
    threshold = cfg.threshold_fraction * s.max()
    for peak in _plateau_peaks(s):
        if peak >= window:
            break
        if s[peak] >= threshold:
            return int(peak)
    raise PeakDetectionError(
        f"no peak >= {cfg.threshold_fraction:.2f} of max within the first "
        f"{cfg.search_window_seconds} s"
    )


def gate_signal(
    sig: EcgSignal, peak_index: int, duration_seconds: float = DEFAULT_GATE_SECONDS
) -> EcgSignal:
    """Cut a fixed-duration window starting exactly at ``peak_index``.

    Never pads: a signal too short to fill the window is an error, so the
    output length is always round(duration * rate).
    """
    if not 0 <= peak_index < len(sig):
        raise ValidationError(f"peak index {peak_index} out of range [0, {len(sig)})")
    n_out = int(round(duration_seconds * sig.sample_rate))
    if n_out < 1:
        raise ValidationError("gate duration is shorter than one sample")
    if peak_index + n_out > len(sig):
        raise InsufficientDataError(
            f"need {n_out} samples after index {peak_index}, "
            f"only {len(sig) - peak_index} available"
        )
    return replace(sig, samples=sig.samples[peak_index : peak_index + n_out].copy())


def preprocess(
    sig: EcgSignal,
    detector: PeakDetectorConfig = PeakDetectorConfig(),
    duration_seconds: float = DEFAULT_GATE_SECONDS,
) -> EcgSignal:
    """Full conditioning chain on one raw signal.

    Rescale to [0, 1], remove the mean, find the first R peak, gate to the
    fixed window, then re-center the window so the emitted samples are
    zero-mean regardless of what the cut removed.
    """
    centered = zero_mean(normalize_amplitude(sig))
    peak = find_first_r_peak(centered, detector)
    gated = gate_signal(centered, peak, duration_seconds)
    return zero_mean(gated)


def read_signal(path, sample_rate: float | None = None) -> EcgSignal:
    """Load a signal from one-value-per-line text or two-column (time, value) CSV.

    For CSV input the rate is inferred from the time column unless given
    explicitly; plain text has no timing, so the default rate applies.
    """
    p = Path(path)
    try:
        lines = [ln.strip() for ln in p.read_text().splitlines()]
    except OSError as exc:
        raise ValidationError(f"cannot read signal file {p}: {exc}") from exc
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise ValidationError(f"signal file {p} is empty")
    if p.suffix.lower() == ".csv":
        times, values = [], []
        for lineno, ln in enumerate(lines, start=1):
            parts = [x.strip() for x in ln.split(",")]
            if len(parts) != 2:
                raise ValidationError(f"{p}:{lineno}: expected 'time,value', got {ln!r}")
            try:
                times.append(float(parts[0]))
                values.append(float(parts[1]))
            except ValueError as exc:
                raise ValidationError(f"{p}:{lineno}: non-numeric field") from exc
        if sample_rate is None:
            dt = np.diff(np.asarray(times))
            if dt.size == 0 or np.any(dt <= 0):
                raise ValidationError(f"{p}: time column must be strictly increasing")
            sample_rate = float(1.0 / np.median(dt))
        return EcgSignal(samples=np.asarray(values), sample_rate=sample_rate)
    try:
        values = [float(ln) for ln in lines]
    except ValueError as exc:
        raise ValidationError(f"{p}: non-numeric line in signal file") from exc
    return EcgSignal(
        samples=np.asarray(values),
        sample_rate=DEFAULT_SAMPLE_RATE if sample_rate is None else sample_rate,
    )


def write_signal(sig: EcgSignal, path) -> None:
    """Write a signal in the format implied by the extension (.csv or text)."""
    p = Path(path)
    if p.suffix.lower() == ".csv":
        lines = [
            f"{i / sig.sample_rate!r},{v!r}" for i, v in enumerate(map(float, sig.samples))
        ]
    else:
        lines = [repr(float(v)) for v in sig.samples]
    p.write_text("\n".join(lines) + "\n")
