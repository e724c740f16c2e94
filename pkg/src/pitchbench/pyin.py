"""Probabilistic YIN pitch engine.

Per frame, the cumulative mean normalized difference curve is searched
once per threshold: each threshold selects the first local minimum
below it (the classic absolute-threshold rule), and a candidate's
probability is the prior weight of all thresholds that selected it.
The thresholds carry a Beta-shaped prior concentrated near the classic
single-threshold working point, so most probability mass behaves like
plain YIN while shallower dips still receive some.

Decoding runs a Viterbi pass over log-spaced pitch bins plus one
unvoiced state. Voiced-to-voiced transition weights decay triangularly
with pitch-bin distance and are deliberately *not* row-normalized:
normalizing across a hundred-plus bins would make every voiced
self-transition two orders of magnitude costlier than staying
unvoiced, and the decoder would flicker unvoiced on perfectly periodic
input. Path scores are therefore compared as products of observation
values and transition weights; ties resolve toward the lower-frequency
state, with unvoiced ordered lowest.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.stats import beta as beta_dist

from .signal import AudioSignal, cmnd, frame_signal, parabolic_refine, yin_difference
from .trackio import PitchTrack


@dataclass(frozen=True)
class PyinConfig:
    """Tunables for candidate extraction and Viterbi smoothing."""

    fmin_hz: float = 60.0
    fmax_hz: float = 400.0
    frame_len_ms: float = 40.0
    hop_ms: float = 10.0
    n_thresholds: int = 100
    threshold_prior_mean: float = 0.1
    bins_per_semitone: int = 5
    switch_prob: float = 0.01
    max_transition_semitones: float = 12.0

    def __post_init__(self):
        if not 0 < self.fmin_hz < self.fmax_hz:
            raise ValueError(f"need 0 < fmin < fmax, got ({self.fmin_hz}, {self.fmax_hz})")
        if self.frame_len_ms <= 0 or self.hop_ms <= 0:
            raise ValueError("frame_len_ms and hop_ms must be > 0")
        if self.n_thresholds < 1:
            raise ValueError(f"n_thresholds must be >= 1, got {self.n_thresholds}")
        if not 0 < self.threshold_prior_mean < 1:
            raise ValueError(f"threshold_prior_mean must be in (0,1)")
        if self.bins_per_semitone < 1:
            raise ValueError(f"bins_per_semitone must be >= 1")
        if not 0 < self.switch_prob < 1:
            raise ValueError(f"switch_prob must be in (0,1), got {self.switch_prob}")
        if self.max_transition_semitones <= 0:
            raise ValueError("max_transition_semitones must be > 0")

    def validate_rate(self, sample_rate_hz: float) -> None:
        if not self.fmax_hz < sample_rate_hz / 2:
            raise ValueError(
                f"fmax {self.fmax_hz} Hz must be below Nyquist {sample_rate_hz / 2} Hz"
            )

    @property
    def n_bins(self) -> int:
        span_semitones = 12.0 * math.log2(self.fmax_hz / self.fmin_hz)
        return int(math.floor(span_semitones * self.bins_per_semitone)) + 1

    def bin_frequency(self, index: int) -> float:
        return self.fmin_hz * 2.0 ** (index / (12.0 * self.bins_per_semitone))

    def bin_of(self, f0_hz: float) -> int:
        raw = 12.0 * self.bins_per_semitone * math.log2(f0_hz / self.fmin_hz)
        return min(max(int(round(raw)), 0), self.n_bins - 1)


class PitchCandidate(NamedTuple):
    f0_hz: float
    probability: float


def _threshold_weights(config: PyinConfig) -> tuple[np.ndarray, np.ndarray]:
    """Equally spaced thresholds in (0, 1] and their Beta prior mass.

    The prior is Beta(2, b) with mean ``threshold_prior_mean``,
    discretized as CDF increments so the weights sum to 1.
    """
    a = 2.0
    b = a * (1.0 - config.threshold_prior_mean) / config.threshold_prior_mean
    grid = np.arange(0, config.n_thresholds + 1) / config.n_thresholds
    cdf = beta_dist.cdf(grid, a, b)
    return grid[1:], np.diff(cdf)


def pyin_candidates(
    frame: np.ndarray, config: PyinConfig, sample_rate_hz: float
) -> list[PitchCandidate]:
    """Extract pitch candidates with probabilities from one frame.

    Lags are searched in ``[rate/fmax, rate/fmin]`` intersected with
    the valid lag range of the difference curve. Candidates come back
    sorted by frequency; their probabilities sum to at most 1, with the
    remainder being the frame's unvoiced mass. Silent frames yield an
    empty list.
    """
    config.validate_rate(sample_rate_hz)
    frame = np.asarray(frame, dtype=np.float64)

    lag_min = max(2, int(math.ceil(sample_rate_hz / config.fmax_hz)))
    lag_max = min(int(math.floor(sample_rate_hz / config.fmin_hz)), (frame.size - 1) // 2)
    if lag_min >= lag_max:
        return []

    curve = cmnd(yin_difference(frame, lag_max))
    d = curve.values

    # local minima of the CMND inside the search band, in lag order
    interior = np.arange(lag_min, lag_max)
    is_min = (d[interior] < d[interior - 1]) & (d[interior] <= d[interior + 1])
    minima = interior[is_min]
    if minima.size == 0:
        return []

    thresholds, weights = _threshold_weights(config)
    # threshold s selects the first minimum with depth < s, i.e. minimum k
    # exactly when prefix_best[k] >= s > depth[k]
    depths = d[minima]
    prefix_best = np.concatenate(([np.inf], np.minimum.accumulate(depths)[:-1]))

    candidates = []
    for lag, depth, ceiling in zip(minima, depths, prefix_best):
        mass = float(np.sum(weights[(thresholds > depth) & (thresholds <= ceiling)]))
        if mass <= 0.0:
            continue
        refined = parabolic_refine(curve, int(lag))
        f0 = sample_rate_hz / refined
        f0 = min(max(f0, config.fmin_hz), config.fmax_hz)
        candidates.append(PitchCandidate(f0, mass))
    candidates.sort(key=lambda c: c.f0_hz)
    return candidates


# ---------------------------------------------------------------------------
# HMM decoding
# ---------------------------------------------------------------------------
# State 0 is unvoiced; states 1..n_bins are voiced pitch bins in ascending
# frequency, so an argmax that keeps the first maximum breaks ties toward
# the lower-frequency state.

def _observations(
    candidate_sets: list[list[PitchCandidate]], config: PyinConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame observation values and the output frequency per bin.

    obs[t, 0] is the unvoiced mass (1 minus the candidate total);
    obs[t, 1+b] accumulates the probability of candidates mapping to
    bin b. freqs[t, b] remembers the refined frequency of the most
    probable candidate in that bin, defaulting to the bin center.
    """
    n_frames = len(candidate_sets)
    n_bins = config.n_bins
    obs = np.zeros((n_frames, n_bins + 1))
    centers = np.array([config.bin_frequency(b) for b in range(n_bins)])
    freqs = np.tile(centers, (n_frames, 1))
    best_prob = np.zeros((n_frames, n_bins))

    for t, cands in enumerate(candidate_sets):
        total = 0.0
        for cand in cands:
            if not 0.0 <= cand.probability <= 1.0:
                raise ValueError(f"candidate probability {cand.probability} outside [0, 1]")
            total += cand.probability
            b = config.bin_of(cand.f0_hz)
            obs[t, 1 + b] += cand.probability
            if cand.probability > best_prob[t, b]:
                best_prob[t, b] = cand.probability
                freqs[t, b] = cand.f0_hz
        if total > 1.0 + 1e-9:
            raise ValueError(f"frame {t}: candidate probabilities sum to {total} > 1")
        obs[t, 0] = max(0.0, 1.0 - total)
    return obs, freqs


def _transition_weights(config: PyinConfig) -> np.ndarray:
    """(n_bins+1)^2 transition weight matrix, unvoiced state first.

    Voiced->voiced weight: (1 - switch_prob) * max(0, 1 - dist/width)
    where dist is the bin distance and width is the transition reach in
    bins. Voiced<->unvoiced weight is switch_prob in both directions;
    unvoiced->unvoiced is 1 - switch_prob.
    """
    n_bins = config.n_bins
    width = config.max_transition_semitones * config.bins_per_semitone
    dist = np.abs(np.arange(n_bins)[:, None] - np.arange(n_bins)[None, :])
    tri = np.maximum(0.0, 1.0 - dist / width)

    weights = np.zeros((n_bins + 1, n_bins + 1))
    weights[0, 0] = 1.0 - config.switch_prob
    weights[0, 1:] = config.switch_prob
    weights[1:, 0] = config.switch_prob
    weights[1:, 1:] = (1.0 - config.switch_prob) * tri
    return weights


def _decode_observations(obs: np.ndarray, config: PyinConfig) -> np.ndarray:
    """Max-product Viterbi over the observation matrix; returns state indices.

    Scores are compared in the log domain; scaling every observation of
    a frame by a common positive factor cannot change the decoded path.
    """
    n_frames, n_states = obs.shape
    with np.errstate(divide="ignore"):
        log_obs = np.log(obs)
        log_trans = np.log(_transition_weights(config))

    score = log_obs[0].copy()
    backptr = np.zeros((n_frames, n_states), dtype=np.int64)
    for t in range(1, n_frames):
        stepped = score[:, None] + log_trans
        backptr[t] = np.argmax(stepped, axis=0)
        score = stepped[backptr[t], np.arange(n_states)] + log_obs[t]

    states = np.zeros(n_frames, dtype=np.int64)
    states[-1] = int(np.argmax(score))
    for t in range(n_frames - 1, 0, -1):
        states[t - 1] = backptr[t, states[t]]
    return states


def pyin_viterbi(
    candidate_sets: list[list[PitchCandidate]],
    config: PyinConfig,
    hop_seconds: float = 0.010,
) -> PitchTrack:
    """Decode per-frame candidate sets into a smoothed pitch track.

    Voiced frames carry the refined frequency of the candidate behind
    the decoded bin; unvoiced frames carry 0.0. Empty input decodes to
    an empty track.
    """
    if not candidate_sets:
        return PitchTrack(hop_seconds, np.zeros(0))
    obs, freqs = _observations(candidate_sets, config)
    states = _decode_observations(obs, config)
    f0 = np.zeros(len(candidate_sets))
    voiced = states > 0
    f0[voiced] = freqs[np.flatnonzero(voiced), states[voiced] - 1]
    return PitchTrack(hop_seconds, f0)


def pyin_track(signal: AudioSignal, config: PyinConfig | None = None) -> PitchTrack:
    """Run the full engine on a signal: framing, candidates, decoding."""
    if config is None:
        config = PyinConfig()
    config.validate_rate(signal.sample_rate_hz)
    rate = signal.sample_rate_hz
    frame_len = int(round(config.frame_len_ms * rate / 1000.0))
    hop = int(round(config.hop_ms * rate / 1000.0))
    frames, _grid = frame_signal(signal, frame_len, hop)
    candidate_sets = [pyin_candidates(frame, config, rate) for frame in frames]
    return pyin_viterbi(candidate_sets, config, hop_seconds=hop / rate)
