"""ECG preprocessing: baseline-wander removal, resampling, windowing, synthesis.

Preprocessing is deliberately minimal: recordings are downsampled to the
target rate (256 Hz), baseline wander is removed with a zero-phase high-pass
filter at 0.8 Hz, and the result is cut into non-overlapping 10 s windows of
2560 samples. A seeded synthetic ECG generator supports dataset-free testing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import signal as sps

from .errors import ParameterError, UnsupportedOperationError, ValidationError
from .rng import stream

TARGET_FS_HZ = 256.0
WINDOW_SECONDS = 10.0
WINDOW_LEN = 2560  # 10 s at 256 Hz
BASELINE_CUTOFF_HZ = 0.8
FILTER_ORDER = 4


@dataclass
class RawRecording:
    """A raw single-lead ECG recording with optional affect scores.

    ``condition_labels`` maps target names (``arousal``, ``valence``,
    ``stress``) to self-reported scores on the 1-9 scale.
    """

    samples: np.ndarray
    sample_rate_hz: float
    subject_id: str
    condition_labels: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.size == 0:
            raise ValidationError("recording has no samples")
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError("recording contains non-finite samples")
        if self.sample_rate_hz <= 0:
            raise ValidationError("sample_rate_hz must be positive")
        for name, score in self.condition_labels.items():
            if not (1.0 <= score <= 9.0):
                raise ValidationError(f"score for {name!r} outside [1, 9]: {score}")


@dataclass
class EcgSegment:
    """A fixed-length preprocessed window, the unit of model input."""

    samples: np.ndarray
    subject_id: str = ""
    segment_index: int = 0

    def __post_init__(self) -> None:
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1 or self.samples.size != WINDOW_LEN:
            raise ValidationError(f"segment must have exactly {WINDOW_LEN} samples, got shape {self.samples.shape}")
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError("segment contains non-finite samples")


def highpass_baseline_filter(signal: np.ndarray, fs: float) -> np.ndarray:
    """Remove baseline wander with a zero-phase order-4 Butterworth high-pass.

    Cutoff is 0.8 Hz; the filter is applied forward-backward (sosfiltfilt) so
    QRS timing is not distorted.
    """
    x = np.asarray(signal, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValidationError("input contains non-finite samples")
    if fs <= 2 * BASELINE_CUTOFF_HZ:
        raise ParameterError(f"sampling rate {fs} Hz too low for a {BASELINE_CUTOFF_HZ} Hz high-pass")
    if x.size < 64:
        raise ParameterError("signal too short to filter (need >= 64 samples)")
    sos = sps.butter(FILTER_ORDER, BASELINE_CUTOFF_HZ, btype="highpass", fs=fs, output="sos")
    return sps.sosfiltfilt(sos, x)


def resample(signal: np.ndarray, fs_in: float, fs_out: float) -> np.ndarray:
    """Anti-aliased downsampling from fs_in to fs_out.

    Polyphase decimation with a Kaiser-windowed FIR low-pass cut off at
    0.45 * fs_out. Upsampling is out of scope and rejected.
    """
    if fs_in <= 0 or fs_out <= 0:
        raise ParameterError("sampling rates must be positive")
    if fs_out > fs_in:
        raise UnsupportedOperationError("upsampling is not supported")
    x = np.asarray(signal, dtype=np.float64)
    if fs_out == fs_in:
        return x.copy()
    ratio = Fraction(fs_out / fs_in).limit_denominator(1000)
    up, down = ratio.numerator, ratio.denominator
    # Kaiser low-pass with ~80 dB stopband; cutoff leaves 10% transition
    # headroom below the output Nyquist.
    numtaps = 16 * down + 1
    beta = sps.kaiser_beta(80.0)
    h = sps.firwin(numtaps, 0.45 * fs_out, window=("kaiser", beta), fs=fs_in * up)
    y = sps.resample_poly(x, up, down, window=h * up, padtype="line")
    target = int(round(x.size * fs_out / fs_in))
    if y.size > target:
        y = y[:target]
    elif y.size < target:
        y = np.pad(y, (0, target - y.size), mode="edge")
    return y


def segment(signal: np.ndarray, fs: float, window_s: float = WINDOW_SECONDS,
            subject_id: str = "") -> list[EcgSegment]:
    """Cut a signal into non-overlapping fixed windows; the tail remainder is dropped."""
    x = np.asarray(signal, dtype=np.float64)
    win = fs * window_s
    if abs(win - round(win)) > 1e-9:
        raise ParameterError(f"fs * window_s must be an integer, got {win}")
    win = int(round(win))
    n = x.size // win
    return [EcgSegment(x[i * win:(i + 1) * win], subject_id=subject_id, segment_index=i)
            for i in range(n)]


# Per-beat morphology: (center offset as fraction of the beat, width in
# seconds, amplitude in mV) for the P, Q, R, S and T waves.
_WAVES = (
    (-0.22, 0.045, 0.12),   # P
    (-0.045, 0.012, -0.16),  # Q
    (0.0, 0.018, 1.0),       # R
    (0.045, 0.014, -0.22),   # S
    (0.30, 0.090, 0.30),     # T
)


def synth_ecg(heart_rate_bpm: float, fs: float, duration_s: float, seed: int) -> np.ndarray:
    """Generate a seeded synthetic ECG as a sum of Gaussian bumps per beat.

    Each beat contributes five Gaussians (P-QRS-T morphology); beat-to-beat
    intervals carry seeded jitter. Output is zero-mean and deterministic for
    a fixed seed.
    """
    if not (30.0 <= heart_rate_bpm <= 220.0):
        raise ParameterError(f"heart rate {heart_rate_bpm} bpm outside [30, 220]")
    if duration_s <= 0:
        raise ParameterError("duration must be positive")
    rng = stream(seed, 0)
    n = int(round(fs * duration_s))
    t = np.arange(n) / fs
    mean_rr = 60.0 / heart_rate_bpm

    # Beat times with 1.5% RR jitter, covering a margin beyond both ends so
    # edge beats contribute their full morphology.
    n_beats = int(np.ceil(duration_s / mean_rr)) + 4
    rr = mean_rr * (1.0 + 0.015 * rng.standard_normal(n_beats))
    beat_times = np.cumsum(rr) - 2 * mean_rr

    y = np.zeros(n)
    for bt, interval in zip(beat_times, rr):
        for frac, width, amp in _WAVES:
            c = bt + frac * interval
            y += amp * np.exp(-0.5 * ((t - c) / width) ** 2)
    y -= y.mean()
    return y
