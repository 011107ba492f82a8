"""Utterance manifests (JSON Lines), corpus statistics, transcript normalization
and speaker-disjoint splitting."""

from __future__ import annotations

import json
import math
import os
import re
import unicodedata
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DuplicateId, InfeasibleSplit, ParseError

FIELDS = ("id", "audio_path", "duration_s", "transcript", "speaker_id", "corpus", "accent")
OPTIONAL_FIELDS = ("alpha",)


@dataclass(frozen=True)
class UtteranceRecord:
    id: str
    audio_path: str
    duration_s: float
    transcript: str
    speaker_id: str
    corpus: str
    accent: str
    alpha: float | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("utterance id must be non-empty")
        if not (self.duration_s > 0 and math.isfinite(self.duration_s)):
            raise ValueError(f"{self.id}: duration_s must be positive, got {self.duration_s}")

    def to_json(self) -> dict:
        out = {name: getattr(self, name) for name in FIELDS}
        if self.alpha is not None:
            out["alpha"] = self.alpha
        return out

    @classmethod
    def from_json(cls, obj, line=None) -> "UtteranceRecord":
        if not isinstance(obj, dict):
            raise ParseError("record must be a JSON object", line=line)
        unknown = set(obj) - set(FIELDS) - set(OPTIONAL_FIELDS)
        if unknown:
            raise ParseError(f"unknown field(s) {sorted(unknown)}", line=line, field=sorted(unknown)[0])
        for name in FIELDS:
            if name not in obj:
                raise ParseError(f"missing field {name!r}", line=line, field=name)
        for name in ("id", "audio_path", "transcript", "speaker_id", "corpus", "accent"):
            if not isinstance(obj[name], str):
                raise ParseError(f"field {name!r} must be a string", line=line, field=name)
        duration = obj["duration_s"]
        if isinstance(duration, bool) or not isinstance(duration, (int, float)) or not duration > 0:
            raise ParseError("field 'duration_s' must be a positive number", line=line, field="duration_s")
        alpha = obj.get("alpha")
        if alpha is not None and (isinstance(alpha, bool) or not isinstance(alpha, (int, float))):
            raise ParseError("field 'alpha' must be a number", line=line, field="alpha")
        try:
            return cls(alpha=None if alpha is None else float(alpha), **{k: obj[k] for k in FIELDS})
        except ValueError as exc:
            raise ParseError(str(exc), line=line) from exc


@dataclass(frozen=True)
class Manifest:
    """Ordered, id-unique collection of utterance records.

    ``root`` is the directory relative ``audio_path`` values resolve against
    (the manifest file's directory when loaded from disk).
    """

    records: tuple = ()
    root: Path | None = None

    def __post_init__(self):
        records = tuple(self.records)
        seen = set()
        for record in records:
            if record.id in seen:
                raise DuplicateId(f"duplicate utterance id {record.id!r}")
            seen.add(record.id)
        object.__setattr__(self, "records", records)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    @property
    def duration_s(self) -> float:
        return math.fsum(r.duration_s for r in self.records)

    @property
    def speakers(self) -> set:
        return {r.speaker_id for r in self.records}

    def resolve(self, record: UtteranceRecord) -> Path:
        path = Path(record.audio_path)
        if path.is_absolute() or self.root is None:
            return path
        return self.root / path

    def subset(self, records: Iterable[UtteranceRecord]) -> "Manifest":
        return Manifest(tuple(records), self.root)

    def by_speaker(self) -> "OrderedDict[str, list]":
        groups: OrderedDict[str, list] = OrderedDict()
        for record in self.records:
            groups.setdefault(record.speaker_id, []).append(record)
        return groups

    def rooted_at(self, root) -> "Manifest":
        """Same audio, with paths rewritten relative to ``root``."""
        root = Path(root)
        base = os.path.abspath(root)
        records = []
        for record in self.records:
            target = os.path.abspath(self.resolve(record))
            rel = os.path.relpath(target, base)
            records.append(replace(record, audio_path=Path(rel).as_posix()))
        return Manifest(tuple(records), root)


def concat(manifests: Sequence[Manifest]) -> Manifest:
    """Concatenate manifests, resolving every path against the first one's root."""
    if not manifests:
        return Manifest()
    root = manifests[0].root
    parts = [m if m.root == root or root is None else m.rooted_at(root) for m in manifests]
    return Manifest(tuple(r for m in parts for r in m.records), root)


VERIFY_TOLERANCE_S = 1e-3


def _header_duration(path) -> float:
    import wave

    with wave.open(str(path), "rb") as handle:
        return handle.getnframes() / handle.getframerate()


def load_manifest(path, verify: bool = False) -> Manifest:
    """Read a JSONL manifest; audio paths resolve against the file's directory.

    Durations are trusted as written. ``verify=True`` re-reads every WAV
    header and raises ParseError if a stored duration is off by more than
    a millisecond.
    """
    path = Path(path)
    records = []
    with open(path, encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", line=number) from exc
            records.append(UtteranceRecord.from_json(obj, line=number))
    seen = set()
    for record in records:
        if record.id in seen:
            raise DuplicateId(f"{path}: duplicate utterance id {record.id!r}")
        seen.add(record.id)
    manifest = Manifest(tuple(records), path.parent)
    if verify:
        for record in records:
            actual = _header_duration(manifest.resolve(record))
            if abs(actual - record.duration_s) > VERIFY_TOLERANCE_S:
                raise ParseError(
                    f"{record.id}: manifest says {record.duration_s} s, audio has {actual} s", field="duration_s"
                )
    return manifest


def dumps_record(record: UtteranceRecord) -> str:
    return json.dumps(record.to_json(), ensure_ascii=False)


def save_manifest(manifest: Manifest, path) -> None:
    """Write one canonical JSON object per line.

    Relative audio paths are rewritten if the file is saved somewhere other
    than the manifest's root, so they keep pointing at the same audio.
    """
    path = Path(path)
    if manifest.root is not None and Path(manifest.root).resolve() != path.parent.resolve():
        manifest = manifest.rooted_at(path.parent)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for record in manifest.records:
            handle.write(dumps_record(record) + "\n")


@dataclass(frozen=True)
class CorpusStats:
    total_duration_s: float
    utterance_count: int
    speaker_count: int
    per_corpus: dict = field(default_factory=dict)

    @property
    def hours(self) -> float:
        return self.total_duration_s / 3600.0

    def to_json(self) -> dict:
        out = {
            "duration": format_hm(self.total_duration_s),
            "duration_s": self.total_duration_s,
            "utterances": self.utterance_count,
            "speakers": self.speaker_count,
        }
        if self.per_corpus:
            out["per_corpus"] = {k: v.to_json() for k, v in self.per_corpus.items()}
        return out


def format_hm(seconds: float) -> str:
    """Render a duration as ``H:MM`` with minutes rounded to nearest."""
    minutes = int(round(seconds / 60.0))
    return f"{minutes // 60}:{minutes % 60:02d}"


def _flat_stats(records) -> CorpusStats:
    records = list(records)
    return CorpusStats(
        math.fsum(r.duration_s for r in records),
        len(records),
        len({r.speaker_id for r in records}),
    )


def compute_stats(manifest: Manifest) -> CorpusStats:
    total = _flat_stats(manifest.records)
    groups: dict = {}
    for record in manifest.records:
        groups.setdefault(record.corpus, []).append(record)
    per_corpus = {name: _flat_stats(groups[name]) for name in sorted(groups)}
    return replace(total, per_corpus=per_corpus)


_APOSTROPHES = str.maketrans({"’": "'", "ʼ": "'", "‘": "'", "‐": "-", "‑": "-"})


def normalize_transcript(text: str, keep_apostrophes: bool = True, keep_hyphens: bool = True) -> list:
    """Lowercase, strip punctuation and split into words.

    Apostrophes and hyphens survive only between two word characters, which
    keeps French elisions (``c'est``) and compounds (``peut-être``) intact.
    """
    text = unicodedata.normalize("NFC", text).translate(_APOSTROPHES).lower()
    kept = ""
    if keep_apostrophes:
        kept += "'"
    if keep_hyphens:
        kept += "-"
    chars = []
    for ch in text:
        if ch.isalnum() or ch in kept:
            chars.append(ch)
        else:
            chars.append(" ")
    text = "".join(chars)
    if kept:
        marks = re.escape(kept)
        # Marks not flanked by word characters on both sides are punctuation.
        pattern = rf"(?<![^\W_])[{marks}]|[{marks}](?![^\W_])"
        previous = None
        while previous != text:
            previous = text
            text = re.sub(pattern, " ", text)
    return text.split()


def _speaker_order(groups, rng: np.random.Generator) -> list:
    """Speakers by descending total duration; ties broken by a seeded shuffle."""
    names = list(groups)
    rng.shuffle(names)
    totals = {name: math.fsum(r.duration_s for r in groups[name]) for name in names}
    return sorted(names, key=lambda name: -totals[name]), totals


def speaker_disjoint_split(
    manifest: Manifest,
    targets: Sequence[tuple],
    seed: int = 42,
    tolerance: float = 0.10,
    remainder: str = "remainder",
) -> "OrderedDict[str, Manifest]":
    """Partition ``manifest`` into speaker-disjoint splits of roughly the requested hours.

    Speakers are placed largest first into the split with the largest
    remaining deficit that can take them without overshooting its target by
    more than ``tolerance``; speakers that fit nowhere go to ``remainder``.
    Raises InfeasibleSplit if a split ends up outside ``target * (1 +- tolerance)``.
    """
    names = [name for name, _ in targets]
    if len(set(names)) != len(names) or remainder in names:
        raise ValueError(f"split names must be unique and differ from {remainder!r}")
    target_s = [float(hours) * 3600.0 for _, hours in targets]
    if any(t <= 0 for t in target_s):
        raise ValueError("split targets must be positive")
    groups = manifest.by_speaker()
    # Targets may oversubscribe the corpus a little (8+3+3 h out of 13:20),
    # as long as every split can still land within tolerance.
    if sum(target_s) * (1 - tolerance) > manifest.duration_s * (1 + 1e-9):
        raise InfeasibleSplit(
            f"targets total {sum(target_s) / 3600:.3f} h but manifest has {manifest.duration_s / 3600:.3f} h"
        )
    if len(groups) < len(targets):
        raise InfeasibleSplit(f"{len(groups)} speakers cannot fill {len(targets)} splits")

    order, totals = _speaker_order(groups, np.random.default_rng(seed))
    filled = [0.0] * len(targets)
    assignment = {}
    for speaker in order:
        size = totals[speaker]
        candidates = sorted(range(len(targets)), key=lambda i: (-(target_s[i] - filled[i]), i))
        for i in candidates:
            if target_s[i] - filled[i] <= 0:
                break
            if filled[i] + size <= target_s[i] * (1 + tolerance):
                filled[i] += size
                assignment[speaker] = names[i]
                break

    for i, name in enumerate(names):
        deviation = abs(filled[i] - target_s[i]) / target_s[i]
        if deviation > tolerance:
            raise InfeasibleSplit(
                f"split {name!r} reached {filled[i] / 3600:.3f} h for a {target_s[i] / 3600:.3f} h target"
            )

    buckets = OrderedDict((name, []) for name in names)
    buckets[remainder] = []
    for record in manifest.records:
        buckets[assignment.get(record.speaker_id, remainder)].append(record)
    return OrderedDict((name, manifest.subset(records)) for name, records in buckets.items())


def speaker_overlap(a: Manifest, b: Manifest) -> list:
    """Speaker ids present in both manifests, sorted."""
    return sorted(a.speakers & b.speakers)
