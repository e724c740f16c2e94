"""Shared synthetic-signal builders for the test suite."""
import numpy as np
import pytest

from pitchbench import AudioSignal


def sine(freq_hz, dur_s, rate_hz, amp=0.7, phase=0.0):
    t = np.arange(int(round(dur_s * rate_hz))) / rate_hz
    return amp * np.sin(2 * np.pi * freq_hz * t + phase)


def sawtooth(freq_hz, dur_s, rate_hz, amp=0.6, max_harmonic_hz=4000.0):
    """Band-limited sawtooth: additive 1/k partials, so no aliasing junk."""
    t = np.arange(int(round(dur_s * rate_hz))) / rate_hz
    x = np.zeros_like(t)
    k = 1
    while k * freq_hz < min(0.45 * rate_hz, max_harmonic_hz):
        x += np.sin(2 * np.pi * k * freq_hz * t) / k
        k += 1
    return amp * x / np.max(np.abs(x))


def missing_fundamental(freq_hz, dur_s, rate_hz, amp=0.6, harmonics=(2, 3, 4)):
    """Harmonics of freq_hz with the fundamental itself absent."""
    t = np.arange(int(round(dur_s * rate_hz))) / rate_hz
    x = sum(np.sin(2 * np.pi * h * freq_hz * t) for h in harmonics)
    return amp * x / np.max(np.abs(x))


def padded_tone(samples, rate_hz, lead_s=0.25, trail_s=0.25):
    lead = np.zeros(int(round(lead_s * rate_hz)))
    trail = np.zeros(int(round(trail_s * rate_hz)))
    return AudioSignal(np.concatenate([lead, samples, trail]), rate_hz)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
