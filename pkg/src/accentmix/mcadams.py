"""McAdams-coefficient voice transformation and corpus augmentation.

Each analysis frame is modelled by an all-pole filter; the angle ``phi`` of
every complex pole is replaced by ``phi ** alpha`` while its radius is kept,
which moves the resonances and yields a pseudo voice saying the same words.
The excitation is the residual of the original model, resynthesized through
the transformed one.
"""

from __future__ import annotations

import logging
import re
import math
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from . import lpc
from .audio import AudioBuffer, frame_signal, overlap_add, read_wav, write_wav
from .errors import AccentmixError, ConjugateMismatch, DegenerateFrame, RootFindingDiverged, UnstableFilter
from .manifest import Manifest

log = logging.getLogger(__name__)

ALPHA_RANGE = (0.5, 1.5)
PAPER_ALPHAS = (0.7, 0.8, 0.9, 1.0)


@dataclass(frozen=True)
class McAdamsConfig:
    alpha: float = 0.8
    lpc_order: int | None = None  # None: sample_rate_hz // 1000 + 4
    frame_ms: float = 20.0
    hop_ms: float = 10.0
    angle_floor: float = 0.02

    def __post_init__(self):
        low, high = ALPHA_RANGE
        if not low <= self.alpha <= high:
            raise ValueError(f"alpha must lie in [{low}, {high}], got {self.alpha}")
        if not 0.0 < self.angle_floor < math.pi / 2:
            raise ValueError(f"angle_floor must lie in (0, pi/2), got {self.angle_floor}")
        if self.lpc_order is not None and self.lpc_order < 1:
            raise ValueError(f"lpc_order must be positive, got {self.lpc_order}")
        if not self.frame_ms >= self.hop_ms > 0:
            raise ValueError(f"need frame_ms >= hop_ms > 0, got {self.frame_ms}, {self.hop_ms}")

    def order_for(self, sample_rate_hz: int) -> int:
        return self.lpc_order if self.lpc_order is not None else lpc.default_order(sample_rate_hz)


def transform_poles(poles: lpc.PoleSet, alpha: float, angle_floor: float = 0.02) -> lpc.PoleSet:
    """Raise pole angles in ``(angle_floor, pi - angle_floor)`` to the power ``alpha``.

    Radii are passed through untouched, lower-half poles mirror their upper
    partners, and poles outside the band (real or near-real) are left alone.
    """
    lpc.check_conjugate_closure(poles)
    if alpha == 1.0:
        return poles
    angles = poles.angles.copy()
    magnitude = np.abs(angles)
    band = (magnitude > angle_floor) & (magnitude < math.pi - angle_floor)
    moved = np.clip(magnitude[band] ** alpha, angle_floor, math.pi - angle_floor)
    angles[band] = np.sign(angles[band]) * moved
    return lpc.PoleSet(poles.radii, angles)


@dataclass
class TransformStats:
    frames: int = 0
    degenerate: int = 0
    fallbacks: int = 0


def _frame_geometry(config: McAdamsConfig, sample_rate_hz: int) -> tuple:
    frame_len = int(round(config.frame_ms * 1e-3 * sample_rate_hz))
    hop = int(round(config.hop_ms * 1e-3 * sample_rate_hz))
    return frame_len, hop


def _process_frame(frame, order, config, stats):
    try:
        model = lpc.levinson_durbin(lpc.autocorrelate(frame, order), order)
    except DegenerateFrame:
        stats.degenerate += 1
        return frame
    residual = lpc.inverse_filter(frame, model)
    try:
        poles = transform_poles(lpc.lpc_to_poles(model), config.alpha, config.angle_floor)
        if np.any(poles.radii >= 1.0 - lpc.STABILITY_EPS):
            raise UnstableFilter("pole on or outside the unit circle")
        shifted = lpc.poles_to_lpc(poles)
        out, _ = lpc.synthesis_filter(residual, shifted)
    except (RootFindingDiverged, ConjugateMismatch, UnstableFilter) as exc:
        log.debug("frame passed through untransformed: %s", exc)
        stats.fallbacks += 1
        return frame
    return out


def mcadams_transform(buffer: AudioBuffer, config: McAdamsConfig, return_stats: bool = False):
    """Apply the McAdams transformation to a whole utterance.

    The output has the input's length and rate. It is rescaled only if it
    would otherwise clip. With ``return_stats`` the frame counters (including
    frames that fell back to pass-through) are returned as well.
    """
    if len(buffer) == 0:
        raise ValueError("cannot transform an empty buffer")
    rate = buffer.sample_rate_hz
    frame_len, hop = _frame_geometry(config, rate)
    order = config.order_for(rate)
    if order >= frame_len:
        raise ValueError(f"LPC order {order} must be below the frame length {frame_len}")

    # Pad by a full frame on both sides so every real sample sits where the
    # overlapped windows sum to a constant.
    padded = np.concatenate((np.zeros(frame_len), buffer.samples, np.zeros(frame_len)))
    stack = frame_signal(AudioBuffer(padded, rate), frame_len, hop, "sqrt_hann")
    stats = TransformStats(frames=len(stack))
    frames = np.empty_like(stack.frames)
    for index, frame in enumerate(stack.frames):
        frames[index] = _process_frame(frame, order, config, stats)
    out = overlap_add(stack.replace_frames(frames)).samples[frame_len:frame_len + len(buffer)]

    peak = np.max(np.abs(out)) if len(out) else 0.0
    if peak > 1.0:
        out = out / peak
    result = AudioBuffer(out, rate)
    if stats.fallbacks:
        log.info("%d of %d frames fell back to pass-through", stats.fallbacks, stats.frames)
    return (result, stats) if return_stats else result


def alpha_suffix(alpha: float) -> str:
    return f"__mcadams{alpha:.2f}"


class AugmentResult(NamedTuple):
    manifest: Manifest
    failures: list  # (utterance id, error message)
    fallback_frames: int = 0


def plan_augmentation(manifest: Manifest, alphas: Sequence[float], output_dir) -> Manifest:
    """Output manifest of augment_corpus without touching any audio.

    Records come in input order, each followed by its alpha copies in
    ascending alpha; ids and file names carry an ``__mcadams0.70`` suffix.
    """
    alphas = sorted(set(float(a) for a in alphas))
    if not alphas:
        raise ValueError("at least one alpha is required")
    for alpha in alphas:
        McAdamsConfig(alpha=alpha)
    output_dir = Path(output_dir)
    records = []
    for record in manifest.records:
        stem = re.sub(r"[^\w.-]", "_", record.id)
        for alpha in alphas:
            suffix = alpha_suffix(alpha)
            records.append(replace(
                record,
                id=record.id + suffix,
                audio_path=f"{stem}{suffix}.wav",
                alpha=alpha,
            ))
    return Manifest(tuple(records), output_dir)


def _augment_one(job):
    source, targets, config_kwargs = job
    fallbacks = 0
    try:
        buffer = None
        for alpha, target in targets:
            if alpha == 1.0:
                shutil.copyfile(source, target)
                continue
            if buffer is None:
                buffer = read_wav(source)
            out, stats = mcadams_transform(buffer, McAdamsConfig(alpha=alpha, **config_kwargs), return_stats=True)
            fallbacks += stats.fallbacks
            write_wav(out, target)
    except (OSError, AccentmixError) as exc:
        return False, f"{type(exc).__name__}: {exc}", fallbacks
    return True, "", fallbacks


def augment_corpus(
    manifest: Manifest,
    alphas: Sequence[float] = PAPER_ALPHAS,
    output_dir=".",
    workers: int = 1,
    **config_kwargs,
) -> AugmentResult:
    """Write one transformed copy of every utterance per alpha.

    ``alpha == 1`` copies are byte copies of the source files. Unreadable
    sources are skipped and listed in ``failures`` rather than aborting the
    run. ``config_kwargs`` go to McAdamsConfig (lpc_order, frame_ms, ...).
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    plan = plan_augmentation(manifest, alphas, output_dir)
    n_alpha = len(plan) // max(len(manifest), 1)
    jobs = []
    for index, record in enumerate(manifest.records):
        planned = plan.records[index * n_alpha:(index + 1) * n_alpha]
        targets = [(p.alpha, str(plan.resolve(p))) for p in planned]
        jobs.append((str(manifest.resolve(record)), targets, config_kwargs))

    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_augment_one, jobs))
    else:
        outcomes = [_augment_one(job) for job in jobs]

    kept, failures, fallbacks = [], [], 0
    for index, (record, (ok, message, n_fallback)) in enumerate(zip(manifest.records, outcomes)):
        fallbacks += n_fallback
        if ok:
            kept.extend(plan.records[index * n_alpha:(index + 1) * n_alpha])
        else:
            log.warning("skipping %s: %s", record.id, message)
            failures.append((record.id, message))
    return AugmentResult(Manifest(tuple(kept), output_dir), failures, fallbacks)
