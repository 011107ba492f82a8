"""Summaries of WER results across training sets and test sets.

Outputs are plain CSV / JSON / aligned text; drawing the figures is left to
whatever plotting tool reads the CSV.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import MissingTestset

TEST_SETS = ("CV", "AAF", "CFPB", "CaFE")


@dataclass(frozen=True)
class ExperimentResult:
    train_set_name: str
    per_testset_wer: dict = field(default_factory=dict)
    nominal_cv_proportion: float | None = None

    def __post_init__(self):
        for name, value in self.per_testset_wer.items():
            if not (isinstance(value, (int, float)) and value >= 0 and not math.isnan(value)):
                raise ValueError(f"{self.train_set_name}/{name}: WER must be >= 0, got {value!r}")

    def to_json(self) -> dict:
        return {
            "train_set_name": self.train_set_name,
            "nominal_cv_proportion": self.nominal_cv_proportion,
            "per_testset_wer": dict(self.per_testset_wer),
        }

    @classmethod
    def from_json(cls, obj) -> "ExperimentResult":
        return cls(obj["train_set_name"], dict(obj["per_testset_wer"]), obj.get("nominal_cv_proportion"))


def load_results(path) -> list:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return [ExperimentResult.from_json(obj) for obj in data]


def save_results(results, path) -> None:
    Path(path).write_text(json.dumps([r.to_json() for r in results], indent=2, ensure_ascii=False) + "\n",
                          encoding="utf-8")


def _format(value) -> str:
    return "" if value is None else repr(float(value))


@dataclass(frozen=True)
class SummaryTable:
    testsets: tuple
    rows: tuple  # (train set, {testset: wer})
    best: dict  # testset -> set of row indices holding the column minimum

    def is_best(self, row: int, testset: str) -> bool:
        return row in self.best.get(testset, ())

    def to_json(self) -> dict:
        return {
            "testsets": list(self.testsets),
            "rows": [
                {
                    "train_set": name,
                    "wer": {t: values.get(t) for t in self.testsets},
                    "best": [t for t in self.testsets if self.is_best(i, t)],
                }
                for i, (name, values) in enumerate(self.rows)
            ],
        }

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["train_set", *self.testsets, "best"])
        for i, (name, values) in enumerate(self.rows):
            best = ";".join(t for t in self.testsets if self.is_best(i, t))
            writer.writerow([name, *(_format(values.get(t)) for t in self.testsets), best])
        return buffer.getvalue()

    def to_text(self) -> str:
        """Aligned table; a ``*`` marks each column minimum."""
        header = ["Train set", *self.testsets]
        body = []
        for i, (name, values) in enumerate(self.rows):
            cells = [name]
            for t in self.testsets:
                value = values.get(t)
                cell = "-" if value is None else f"{value:.2f}"
                cells.append(cell + ("*" if self.is_best(i, t) else " "))
            body.append(cells)
        widths = [max(len(row[c]) for row in [header, *body]) for c in range(len(header))]
        lines = []
        for row in [header, *body]:
            first = row[0].ljust(widths[0])
            lines.append("  ".join([first, *(cell.rjust(w) for cell, w in zip(row[1:], widths[1:]))]).rstrip())
        lines.insert(1, "-" * len(lines[0]))
        return "\n".join(lines) + "\n"


def summary_table(results, testsets=None) -> SummaryTable:
    if not results:
        raise ValueError("summary_table needs at least one result")
    if testsets is None:
        present = {t for r in results for t in r.per_testset_wer}
        testsets = [t for t in TEST_SETS if t in present] + sorted(present - set(TEST_SETS))
    best = {}
    for t in testsets:
        values = [(i, r.per_testset_wer[t]) for i, r in enumerate(results) if t in r.per_testset_wer]
        if values:
            low = min(v for _, v in values)
            best[t] = {i for i, v in values if v == low}
    rows = tuple((r.train_set_name, dict(r.per_testset_wer)) for r in results)
    return SummaryTable(tuple(testsets), rows, best)


def tradeoff_scatter(results, x_testset: str = "CV", y_testset: str = "AAF") -> str:
    """CSV ``train_set,<x>,<y>`` with one row per result, sorted by name."""
    for r in results:
        for t in (x_testset, y_testset):
            if t not in r.per_testset_wer:
                raise MissingTestset(f"{r.train_set_name} has no {t} result")
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["train_set", x_testset, y_testset])
    for r in sorted(results, key=lambda r: r.train_set_name):
        writer.writerow([r.train_set_name, _format(r.per_testset_wer[x_testset]),
                         _format(r.per_testset_wer[y_testset])])
    return buffer.getvalue()


def proportion_curve(results, testset: str) -> str:
    """CSV ``proportion,wer,train_set`` sorted by proportion.

    Results without a proportion or lacking ``testset`` are skipped; the
    count appears in a trailing ``# excluded: N`` comment.
    """
    kept, excluded = [], 0
    for r in results:
        if r.nominal_cv_proportion is None or testset not in r.per_testset_wer:
            excluded += 1
        else:
            kept.append(r)
    kept.sort(key=lambda r: (r.nominal_cv_proportion, r.train_set_name))
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["proportion", "wer", "train_set"])
    for r in kept:
        writer.writerow([_format(r.nominal_cv_proportion), _format(r.per_testset_wer[testset]), r.train_set_name])
    buffer.write(f"# excluded: {excluded}\n")
    return buffer.getvalue()
