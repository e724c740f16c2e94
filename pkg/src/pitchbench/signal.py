"""Frame-level signal primitives shared by the pitch engines.

Centered framing, windowed-sinc bandpass filtering, parabolic lag
refinement, and the three lag-domain curves the time-domain estimators
are built on: the YIN difference function, its cumulative mean
normalized form (CMND), and the normalized cross-correlation function
(NCCF).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.signal
from scipy.fft import next_fast_len, rfft, irfft


@dataclass
class AudioSignal:
    """A mono waveform with nominal amplitude range [-1, 1].

    Parameters
    ----------
    samples : array-like, shape (n,)
        Amplitude sequence. Must be finite everywhere.
    sample_rate_hz : float
        Sampling rate in Hz, > 0.
    """

    samples: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"samples must be 1-D, got shape {samples.shape}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ValueError("samples contain NaN or Inf")
        if not self.sample_rate_hz > 0:
            raise ValueError(f"sample_rate_hz must be > 0, got {self.sample_rate_hz}")
        self.samples = samples
        self.sample_rate_hz = float(self.sample_rate_hz)

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate_hz


@dataclass
class FrameGrid:
    """Layout of centered analysis frames over a signal.

    Frame k is centered on sample k * hop_samples, so its timestamp is
    k * hop_samples / sample_rate. With centering, a signal of length L
    yields floor(L / hop) + 1 frames (empty signals yield none).
    """

    frame_len_samples: int
    hop_samples: int
    n_frames: int
    centered: bool = True

    def __post_init__(self):
        if self.frame_len_samples <= 0:
            raise ValueError(f"frame_len_samples must be > 0, got {self.frame_len_samples}")
        if self.hop_samples <= 0:
            raise ValueError(f"hop_samples must be > 0, got {self.hop_samples}")
        if self.n_frames < 0:
            raise ValueError(f"n_frames must be >= 0, got {self.n_frames}")

    def timestamp_s(self, frame_index: int, sample_rate_hz: float) -> float:
        return frame_index * self.hop_samples / sample_rate_hz


@dataclass
class LagCurve:
    """A real-valued function of integer lag (in samples).

    Holds YIN difference, CMND and NCCF curves alike. ``values[i]``
    corresponds to lag ``min_lag_samples + i``.
    """

    values: np.ndarray
    min_lag_samples: int
    max_lag_samples: int

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if self.min_lag_samples < 0:
            raise ValueError(f"min_lag_samples must be >= 0, got {self.min_lag_samples}")
        if self.min_lag_samples > self.max_lag_samples:
            raise ValueError(
                f"min_lag {self.min_lag_samples} exceeds max_lag {self.max_lag_samples}"
            )
        expected = self.max_lag_samples - self.min_lag_samples + 1
        if values.size != expected:
            raise ValueError(f"expected {expected} values, got {values.size}")
        self.values = values

    def value_at(self, lag: int) -> float:
        if not self.min_lag_samples <= lag <= self.max_lag_samples:
            raise ValueError(f"lag {lag} outside [{self.min_lag_samples}, {self.max_lag_samples}]")
        return float(self.values[lag - self.min_lag_samples])

    def lags(self) -> np.ndarray:
        return np.arange(self.min_lag_samples, self.max_lag_samples + 1)


def frame_signal(
    signal: AudioSignal, frame_len_samples: int, hop_samples: int
) -> tuple[np.ndarray, FrameGrid]:
    """Slice a signal into frames centered on multiples of the hop.

    Frame k spans samples ``k*hop - frame_len//2 .. + frame_len`` of the
    input, zero-padded where it extends past either edge, so frame k's
    middle element is sample ``k*hop``. An empty signal yields zero
    frames.

    Returns
    -------
    frames : ndarray, shape (n_frames, frame_len_samples)
    grid : FrameGrid
    """
    if frame_len_samples <= 0:
        raise ValueError(f"frame_len_samples must be > 0, got {frame_len_samples}")
    if hop_samples <= 0:
        raise ValueError(f"hop_samples must be > 0, got {hop_samples}")

    x = signal.samples
    if x.size == 0:
        grid = FrameGrid(frame_len_samples, hop_samples, 0)
        return np.zeros((0, frame_len_samples)), grid

    n_frames = x.size // hop_samples + 1
    half = frame_len_samples // 2
    # padded start of frame k is k*hop; right pad covers the last frame
    needed = (n_frames - 1) * hop_samples + frame_len_samples
    padded = np.pad(x, (half, max(0, needed - half - x.size)))
    windows = np.lib.stride_tricks.sliding_window_view(padded, frame_len_samples)
    frames = windows[:: hop_samples][:n_frames].copy()
    grid = FrameGrid(frame_len_samples, hop_samples, n_frames)
    return frames, grid


def _linear_cross_correlation(frame: np.ndarray, width: int, max_lag: int) -> np.ndarray:
    """c[tau] = sum_{j<width} frame[j] * frame[j+tau] for tau in 0..max_lag."""
    n = next_fast_len(frame.size + width)
    spec_full = rfft(frame, n)
    spec_head = rfft(frame[:width], n)
    cc = irfft(spec_full * np.conj(spec_head), n)
    return cc[: max_lag + 1]


def yin_difference(frame: np.ndarray, max_lag: int) -> LagCurve:
    """Squared-difference curve d(tau) = sum_j (x[j] - x[j+tau])^2.

    The sum runs over a fixed window of ``len(frame) - max_lag`` terms so
    every lag accumulates the same number of differences. d(0) is 0 and
    all values are non-negative.

    Requires ``max_lag < len(frame) / 2``.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if max_lag < 1:
        raise ValueError(f"max_lag must be >= 1, got {max_lag}")
    if not max_lag < frame.size / 2:
        raise ValueError(f"max_lag {max_lag} must be < half the frame length {frame.size}")

    width = frame.size - max_lag
    energy = np.concatenate(([0.0], np.cumsum(frame * frame)))
    head_energy = energy[width]
    lag_energy = energy[width : width + max_lag + 1] - energy[: max_lag + 1]
    cross = _linear_cross_correlation(frame, width, max_lag)
    d = head_energy + lag_energy - 2.0 * cross
    np.maximum(d, 0.0, out=d)  # clip FFT round-off below zero
    d[0] = 0.0
    return LagCurve(d, 0, max_lag)


def cmnd(diff: LagCurve) -> LagCurve:
    """Cumulative mean normalized difference d'(tau).

    d'(0) = 1 and d'(tau) = d(tau) * tau / sum_{j<=tau} d(j). Where the
    running sum is zero (silence), d'(tau) is defined as 1 so silent
    frames never look periodic.
    """
    d = diff.values
    out = np.ones_like(d)
    running = np.cumsum(d[1:])
    taus = np.arange(1, d.size)
    nonzero = running > 0
    out[1:][nonzero] = d[1:][nonzero] * taus[nonzero] / running[nonzero]
    return LagCurve(out, diff.min_lag_samples, diff.max_lag_samples)


def nccf(frame: np.ndarray, min_lag: int, max_lag: int) -> LagCurve:
    """Normalized cross-correlation over lags in [min_lag, max_lag].

    phi(tau) = sum_j x[j]x[j+tau] / sqrt(sum_j x[j]^2 * sum_j x[j+tau]^2)
    with j running over a fixed window of ``len(frame) - max_lag`` terms.
    Values lie in [-1, 1]; lags where either energy term vanishes map
    to 0.

    Requires ``min_lag >= 1`` and ``max_lag < len(frame) / 2``.
    """
    frame = np.asarray(frame, dtype=np.float64)
    if min_lag < 1:
        raise ValueError(f"min_lag must be >= 1, got {min_lag}")
    if min_lag > max_lag:
        raise ValueError(f"min_lag {min_lag} exceeds max_lag {max_lag}")
    if not max_lag < frame.size / 2:
        raise ValueError(f"max_lag {max_lag} must be < half the frame length {frame.size}")

    width = frame.size - max_lag
    energy = np.concatenate(([0.0], np.cumsum(frame * frame)))
    head_energy = energy[width]
    lag_energy = energy[width : width + max_lag + 1] - energy[: max_lag + 1]
    cross = _linear_cross_correlation(frame, width, max_lag)

    denom_sq = head_energy * lag_energy[min_lag:]
    values = np.zeros(max_lag - min_lag + 1)
    ok = denom_sq > 0
    values[ok] = cross[min_lag:][ok] / np.sqrt(denom_sq[ok])
    np.clip(values, -1.0, 1.0, out=values)
    return LagCurve(values, min_lag, max_lag)


def _bandpass_taps(low_hz: float, high_hz: float, sample_rate_hz: float) -> np.ndarray:
    # Hamming windowed sinc; transition width ~ low edge so a tone one
    # octave below the edge already sits in the stopband. Odd tap count
    # keeps the group delay an integer number of samples.
    numtaps = int(math.ceil(3.3 * sample_rate_hz / low_hz))
    numtaps |= 1
    return scipy.signal.firwin(numtaps, [low_hz, high_hz], pass_zero=False, fs=sample_rate_hz)


def bandpass_filter(signal: AudioSignal, low_hz: float, high_hz: float) -> AudioSignal:
    """Linear-phase FIR bandpass with group-delay compensation.

    Output has the same length and rate as the input and stays aligned
    with it (the filter's integer group delay is removed), so frame
    timestamps survive filtering. Band edges must satisfy
    ``0 < low_hz < high_hz < sample_rate / 2``.
    """
    rate = signal.sample_rate_hz
    if not 0 < low_hz < high_hz < rate / 2:
        raise ValueError(
            f"band [{low_hz}, {high_hz}] Hz must lie strictly inside (0, {rate / 2}) Hz"
        )
    x = signal.samples
    if x.size == 0:
        return AudioSignal(x.copy(), rate)
    taps = _bandpass_taps(low_hz, high_hz, rate)
    delay = taps.size // 2
    y = scipy.signal.fftconvolve(x, taps, mode="full")[delay : delay + x.size]
    return AudioSignal(y, rate)


def parabolic_refine(curve: LagCurve, lag: int) -> float:
    """Refine an extremum location to fractional-lag precision.

    Fits a parabola through the curve values at ``lag - 1, lag, lag + 1``
    and returns the abscissa of its vertex, clamped to ``[lag-1, lag+1]``.
    Collinear points, or a lag on the curve boundary, return ``lag``
    unchanged.
    """
    if not curve.min_lag_samples <= lag <= curve.max_lag_samples:
        raise ValueError(
            f"lag {lag} outside [{curve.min_lag_samples}, {curve.max_lag_samples}]"
        )
    if lag in (curve.min_lag_samples, curve.max_lag_samples):
        return float(lag)
    i = lag - curve.min_lag_samples
    y0, y1, y2 = curve.values[i - 1], curve.values[i], curve.values[i + 1]
    denom = y0 - 2.0 * y1 + y2
    if denom == 0.0:
        return float(lag)
    vertex = lag + 0.5 * (y0 - y2) / denom
    return float(min(max(vertex, lag - 1.0), lag + 1.0))
