"""Word (and character) error rate with exact edit-operation counts."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import EmptyReference
from .manifest import normalize_transcript


def align(ref: Sequence, hyp: Sequence) -> tuple:
    """Minimal unit-cost alignment of ``hyp`` against ``ref``.

    Returns ``(substitutions, deletions, insertions)``. On ties the backtrace
    prefers a substitution (or match), then a deletion, then an insertion.
    """
    m, n = len(ref), len(hyp)
    cost = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(1, m + 1):
        cost[i][0] = i
    for j in range(1, n + 1):
        cost[0][j] = j
    for i in range(1, m + 1):
        row, prev = cost[i], cost[i - 1]
        r = ref[i - 1]
        for j in range(1, n + 1):
            diagonal = prev[j - 1] + (r != hyp[j - 1])
            row[j] = min(diagonal, prev[j] + 1, row[j - 1] + 1)

    subs = dels = ins = 0
    i, j = m, n
    while i > 0 or j > 0:
        here = cost[i][j]
        if i > 0 and j > 0 and here == cost[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]):
            subs += ref[i - 1] != hyp[j - 1]
            i, j = i - 1, j - 1
        elif i > 0 and here == cost[i - 1][j] + 1:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return subs, dels, ins


@dataclass(frozen=True)
class UtteranceScore:
    id: str
    substitutions: int
    deletions: int
    insertions: int
    ref_words: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions


@dataclass(frozen=True)
class WerReport:
    """Pooled error counts over a test set.

    ``wer`` is ``100 * (S + D + I) / N`` over the pooled counts, which in
    general differs from the mean of per-utterance rates.
    """

    substitutions: int
    deletions: int
    insertions: int
    ref_words: int
    per_utterance: tuple = field(default_factory=tuple)

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        return 100.0 * self.errors / self.ref_words

    def to_json(self) -> dict:
        return {
            "wer": round(self.wer, 2),
            "substitutions": self.substitutions,
            "deletions": self.deletions,
            "insertions": self.insertions,
            "ref_words": self.ref_words,
            "utterances": len(self.per_utterance),
            "per_utterance": [
                {"id": u.id, "S": u.substitutions, "D": u.deletions, "I": u.insertions, "N": u.ref_words}
                for u in self.per_utterance
            ],
        }


def tokenize(text, unit: str = "word") -> list:
    words = normalize_transcript(text) if isinstance(text, str) else list(text)
    if unit == "word":
        return words
    if unit == "char":
        return list("".join(words))
    raise ValueError(f"unknown unit {unit!r}")


def pool(scores: Iterable[UtteranceScore]) -> WerReport:
    scores = tuple(scores)
    return WerReport(
        sum(s.substitutions for s in scores),
        sum(s.deletions for s in scores),
        sum(s.insertions for s in scores),
        sum(s.ref_words for s in scores),
        scores,
    )


def corpus_wer(pairs: Iterable[tuple], unit: str = "word") -> WerReport:
    """Pooled WER over ``(id, ref, hyp)`` triples.

    ``ref`` and ``hyp`` may be raw strings (normalized here) or token lists.
    ``unit="char"`` scores characters with spaces removed (CER).
    """
    scores = []
    for utt_id, ref, hyp in pairs:
        ref_tokens = tokenize(ref, unit)
        if not ref_tokens:
            raise EmptyReference(utt_id)
        s, d, i = align(ref_tokens, tokenize(hyp, unit))
        scores.append(UtteranceScore(utt_id, s, d, i, len(ref_tokens)))
    if not scores:
        raise ValueError("no utterances to score")
    return pool(scores)
