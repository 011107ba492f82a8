"""Mono 16-bit PCM WAV I/O, framing and overlap-add resynthesis."""

from __future__ import annotations

import wave
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import CorruptFile, InvalidFraming, UnsupportedFormat

PCM_SCALE = 32768.0
MAX_SAMPLE = 1.0 - 2.0**-15

WINDOW_KINDS = ("hann", "sqrt_hann", "rect")
COLA_RTOL = 1e-6


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=np.float64, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class AudioBuffer:
    samples: np.ndarray
    sample_rate_hz: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ValueError(f"mono audio expected, got array of shape {samples.shape}")
        if not np.all(np.isfinite(samples)):
            raise ValueError("audio samples must be finite")
        if int(self.sample_rate_hz) <= 0:
            raise ValueError(f"sample rate must be positive, got {self.sample_rate_hz}")
        object.__setattr__(self, "samples", _frozen(samples))
        object.__setattr__(self, "sample_rate_hz", int(self.sample_rate_hz))

    def __len__(self) -> int:
        return self.samples.shape[0]

    @property
    def duration_s(self) -> float:
        return len(self) / self.sample_rate_hz

    def with_samples(self, samples) -> "AudioBuffer":
        return AudioBuffer(samples, self.sample_rate_hz)


def read_wav(path) -> AudioBuffer:
    """Read a 16-bit PCM mono WAV file, scaling samples by 1/32768."""
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as handle:
            channels = handle.getnchannels()
            width = handle.getsampwidth()
            rate = handle.getframerate()
            n_frames = handle.getnframes()
            if handle.getcomptype() != "NONE":
                raise UnsupportedFormat(f"{path}: compressed WAV is not supported")
            if channels != 1:
                raise UnsupportedFormat(f"{path}: expected mono, got {channels} channels")
            if width != 2:
                raise UnsupportedFormat(f"{path}: expected 16-bit PCM, got {8 * width}-bit")
            data = handle.readframes(n_frames)
    except wave.Error as exc:
        message = str(exc)
        if "unknown format" in message or "not a WAVE" in message or "RIFF id" in message:
            raise UnsupportedFormat(f"{path}: {message}") from exc
        raise CorruptFile(f"{path}: {message}") from exc
    except EOFError as exc:
        raise CorruptFile(f"{path}: truncated header") from exc
    if len(data) != 2 * n_frames:
        raise CorruptFile(f"{path}: data chunk declares {n_frames} frames, found {len(data) // 2}")
    pcm = np.frombuffer(data, dtype="<i2")
    return AudioBuffer(pcm.astype(np.float64) / PCM_SCALE, rate)


def to_pcm16(samples) -> np.ndarray:
    clipped = np.clip(np.asarray(samples, dtype=np.float64), -1.0, MAX_SAMPLE)
    return np.rint(clipped * PCM_SCALE).astype("<i2")


def write_wav(buffer: AudioBuffer, path) -> None:
    """Write ``buffer`` as 16-bit PCM mono; out-of-range samples are clamped."""
    path = Path(path)
    pcm = to_pcm16(buffer.samples)
    with wave.open(str(path), "wb") as handle:
        handle.setnchannels(1)
        handle.setsampwidth(2)
        handle.setframerate(buffer.sample_rate_hz)
        handle.writeframes(pcm.tobytes())


def make_window(kind: str, length: int) -> np.ndarray:
    """Analysis window of ``length`` samples.

    ``hann`` is the periodic Hann window evaluated at half-sample offsets, so
    both endpoints are nonzero and every input sample keeps positive weight.
    It overlap-adds to a constant for any hop ``length / k`` with integer
    ``k >= 2``. ``sqrt_hann`` is its square root and is meant to be applied
    twice (analysis and synthesis).
    """
    if kind == "rect":
        return np.ones(length)
    n = np.arange(length) + 0.5
    hann = 0.5 - 0.5 * np.cos(2.0 * np.pi * n / length)
    if kind == "hann":
        return hann
    if kind == "sqrt_hann":
        return np.sqrt(hann)
    raise InvalidFraming(f"unknown window kind {kind!r}; expected one of {WINDOW_KINDS}")


def cola_deviation(weights: np.ndarray, hop: int) -> float:
    """Relative spread of the steady-state overlap-add sum of ``weights`` shifted by ``hop``."""
    length = len(weights)
    padded = np.zeros(-(-length // hop) * hop)
    padded[:length] = weights
    folded = padded.reshape(-1, hop).sum(axis=0)
    mean = folded.mean()
    if mean <= 0:
        return np.inf
    return float(np.max(np.abs(folded - mean)) / mean)


@dataclass(frozen=True)
class FrameStack:
    """Windowed frames plus everything overlap_add needs to undo the framing.

    ``window`` is applied at analysis, ``synthesis_window`` at overlap-add; their
    product must overlap-add to a constant at ``hop``.
    """

    frames: np.ndarray
    frame_len: int
    hop: int
    window: np.ndarray
    original_len: int
    synthesis_window: np.ndarray = field(default=None)
    sample_rate_hz: int = 16000

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[1] != self.frame_len:
            raise InvalidFraming(f"frames must have shape (n, {self.frame_len}), got {frames.shape}")
        if not self.frame_len >= self.hop >= 1:
            raise InvalidFraming(f"need frame_len >= hop >= 1, got {self.frame_len}, {self.hop}")
        synthesis = np.ones(self.frame_len) if self.synthesis_window is None else self.synthesis_window
        product = np.asarray(self.window) * np.asarray(synthesis)
        if cola_deviation(product, self.hop) > COLA_RTOL:
            raise InvalidFraming(f"window is not constant-overlap-add at hop {self.hop}")
        object.__setattr__(self, "frames", _frozen(frames))
        object.__setattr__(self, "window", _frozen(self.window))
        object.__setattr__(self, "synthesis_window", _frozen(synthesis))

    def __len__(self) -> int:
        return self.frames.shape[0]

    def replace_frames(self, frames) -> "FrameStack":
        return FrameStack(
            frames, self.frame_len, self.hop, self.window, self.original_len,
            self.synthesis_window, self.sample_rate_hz,
        )


def frame_count(length: int, frame_len: int, hop: int) -> int:
    """Number of frames produced by frame_signal, including a padded tail frame."""
    full = 1 + (length - frame_len) // hop
    covered = (full - 1) * hop + frame_len
    return full + (1 if covered < length else 0)


def frame_signal(buffer: AudioBuffer, frame_len: int, hop: int, window_kind: str = "hann") -> FrameStack:
    samples = buffer.samples
    length = len(samples)
    if length == 0:
        raise InvalidFraming("cannot frame an empty buffer")
    if frame_len < hop or hop < 1:
        raise InvalidFraming(f"need frame_len >= hop >= 1, got frame_len={frame_len}, hop={hop}")
    if frame_len > length:
        raise InvalidFraming(f"frame_len {frame_len} exceeds buffer length {length}")
    window = make_window(window_kind, frame_len)
    synthesis = window if window_kind == "sqrt_hann" else None
    if cola_deviation(window if synthesis is None else window * synthesis, hop) > COLA_RTOL:
        raise InvalidFraming(f"{window_kind} window of {frame_len} samples is not COLA at hop {hop}")

    n_frames = frame_count(length, frame_len, hop)
    padded = np.zeros((n_frames - 1) * hop + frame_len)
    padded[:length] = samples
    starts = np.arange(n_frames) * hop
    frames = padded[starts[:, None] + np.arange(frame_len)] * window
    return FrameStack(frames, frame_len, hop, window, length, synthesis, buffer.sample_rate_hz)


def overlap_add(stack: FrameStack) -> AudioBuffer:
    """Overlap-add the frames and divide by the summed window envelope.

    The envelope equals the COLA constant away from the edges; dividing by it
    pointwise also makes the first and last partially covered samples exact.
    """
    n_frames, frame_len = stack.frames.shape
    total = (n_frames - 1) * stack.hop + frame_len
    out = np.zeros(total)
    envelope = np.zeros(total)
    weight = stack.window * stack.synthesis_window
    for index in range(n_frames):
        start = index * stack.hop
        out[start:start + frame_len] += stack.frames[index] * stack.synthesis_window
        envelope[start:start + frame_len] += weight
    floor = 1e-12 * envelope.max()
    nonzero = envelope > floor
    out[nonzero] /= envelope[nonzero]
    out[~nonzero] = 0.0
    return AudioBuffer(out[:stack.original_len], stack.sample_rate_hz)
