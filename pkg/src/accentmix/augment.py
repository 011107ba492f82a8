"""Waveform-domain SpecAugment approximation: speed perturbation, chunk dropping
and frequency-band dropping, seeded per utterance."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.signal import iirnotch, lfilter, resample_poly

from .audio import AudioBuffer
from .errors import InvalidFactor

SPEED_RANGE = (0.5, 2.0)


@dataclass(frozen=True)
class TdAugmentConfig:
    speed_factors: tuple = (0.95, 1.0, 1.05)
    chunk_count_range: tuple = (1, 5)
    chunk_len_range_ms: tuple = (50.0, 100.0)
    band_count_range: tuple = (1, 3)
    band_width_hz: float = 200.0
    master_seed: int = 42

    def __post_init__(self):
        factors = tuple(sorted(float(f) for f in self.speed_factors))
        if not factors:
            raise ValueError("speed_factors must not be empty")
        for factor in factors:
            if not SPEED_RANGE[0] <= factor <= SPEED_RANGE[1]:
                raise InvalidFactor(f"speed factor {factor} outside {SPEED_RANGE}")
        object.__setattr__(self, "speed_factors", factors)
        for name in ("chunk_count_range", "chunk_len_range_ms", "band_count_range"):
            low, high = getattr(self, name)
            if not 0 <= low <= high:
                raise ValueError(f"{name} must satisfy 0 <= min <= max, got {(low, high)}")
        if self.band_width_hz <= 0:
            raise ValueError("band_width_hz must be positive")

    @classmethod
    def identity(cls, master_seed: int = 42) -> "TdAugmentConfig":
        return cls((1.0,), (0, 0), (0.0, 0.0), (0, 0), 200.0, master_seed)


def utterance_rng(master_seed: int, utterance_id: str) -> np.random.Generator:
    """Generator seeded from a stable hash of (master seed, utterance id)."""
    digest = hashlib.blake2b(f"{int(master_seed)}\x00{utterance_id}".encode("utf-8"), digest_size=8).digest()
    return np.random.default_rng(int.from_bytes(digest, "little"))


def perturb_speed(buffer: AudioBuffer, factor: float) -> AudioBuffer:
    """Play ``buffer`` ``factor`` times faster at its original sample rate.

    Uses polyphase resampling with the factor approximated as a ratio of
    integers; the output is trimmed or zero-padded to ``round(len / factor)``.
    """
    if not SPEED_RANGE[0] <= factor <= SPEED_RANGE[1]:
        raise InvalidFactor(f"speed factor {factor} outside {SPEED_RANGE}")
    target = int(round(len(buffer) / factor))
    if factor == 1.0 or len(buffer) == 0:
        return buffer.with_samples(buffer.samples)
    ratio = Fraction(factor).limit_denominator(1000)
    out = resample_poly(buffer.samples, ratio.denominator, ratio.numerator)
    if len(out) >= target:
        out = out[:target]
    else:
        out = np.concatenate((out, np.zeros(target - len(out))))
    return buffer.with_samples(out)


def drop_chunks(buffer: AudioBuffer, rng: np.random.Generator, config: TdAugmentConfig) -> AudioBuffer:
    """Zero a random number of disjoint random-length segments."""
    samples = np.array(buffer.samples)
    n = len(samples)
    low, high = config.chunk_count_range
    count = int(rng.integers(low, high + 1))
    if count == 0 or n == 0:
        return buffer.with_samples(samples)
    len_low, len_high = config.chunk_len_range_ms
    lengths = rng.uniform(len_low, len_high, size=count) * 1e-3 * buffer.sample_rate_hz
    lengths = np.minimum(np.rint(lengths).astype(int), n)
    # Drop the longest chunks until the rest fit side by side.
    lengths = np.sort(lengths)
    while lengths.sum() > n:
        lengths = lengths[:-1]
    lengths = rng.permutation(lengths)
    free = n - int(lengths.sum())
    offsets = np.sort(rng.integers(0, free + 1, size=len(lengths)))
    starts = offsets + np.concatenate(([0], np.cumsum(lengths)[:-1]))
    for start, length in zip(starts, lengths):
        samples[start:start + length] = 0.0
    return buffer.with_samples(samples)


def notch_coefficients(center_hz: float, width_hz: float, sample_rate_hz: int):
    """Second-order IIR notch whose -3 dB width is ``width_hz``."""
    return iirnotch(center_hz, center_hz / width_hz, fs=sample_rate_hz)


def drop_freq_bands(buffer: AudioBuffer, rng: np.random.Generator, config: TdAugmentConfig) -> AudioBuffer:
    low, high = config.band_count_range
    count = int(rng.integers(low, high + 1))
    samples = np.array(buffer.samples)
    nyquist = buffer.sample_rate_hz / 2.0
    width = config.band_width_hz
    if count == 0 or len(samples) == 0 or nyquist - width <= width:
        return buffer.with_samples(samples)
    centers = rng.uniform(width, nyquist - width, size=count)
    for center in centers:
        b, a = notch_coefficients(center, width, buffer.sample_rate_hz)
        samples = lfilter(b, a, samples)
    return buffer.with_samples(samples)


def apply_td_augment(buffer: AudioBuffer, utterance_id: str, config: TdAugmentConfig) -> AudioBuffer:
    """Speed, then chunk drop, then band drop, all from one per-utterance stream."""
    rng = utterance_rng(config.master_seed, utterance_id)
    factor = float(config.speed_factors[int(rng.integers(len(config.speed_factors)))])
    out = perturb_speed(buffer, factor)
    out = drop_chunks(out, rng, config)
    return drop_freq_bands(out, rng, config)
