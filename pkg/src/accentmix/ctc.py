"""Best-path (greedy) CTC decoding of per-frame log-probability matrices.

Matrix files (``*.logits``) are little-endian: 4-byte magic ``AMXL``, then
uint32 T, uint32 V, uint32 blank index, then T*V float32 values row-major.
The vocabulary lives in a JSON sidecar holding a list of V token strings.
"""

from __future__ import annotations

import json
import re
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import MalformedMatrix

MAGIC = b"AMXL"
HEADER = struct.Struct("<4sIII")
ROW_TOLERANCE = 1e-3


@dataclass(frozen=True)
class LogitMatrix:
    values: np.ndarray
    vocab: tuple
    blank_index: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        vocab = tuple(self.vocab)
        if values.ndim != 2 or values.shape[1] != len(vocab):
            raise MalformedMatrix(f"expected a T x {len(vocab)} matrix, got shape {values.shape}")
        if not 0 <= self.blank_index < len(vocab):
            raise MalformedMatrix(f"blank index {self.blank_index} outside vocabulary of {len(vocab)}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "vocab", vocab)

    def validate(self, tolerance: float = ROW_TOLERANCE) -> None:
        if not len(self.values):
            return
        if not np.all(np.isfinite(self.values) | (self.values == -np.inf)):
            raise MalformedMatrix("matrix contains NaN or +inf")
        mass = np.exp(logsumexp(self.values, axis=1))
        bad = np.flatnonzero(np.abs(mass - 1.0) > tolerance)
        if len(bad):
            raise MalformedMatrix(f"row {bad[0]} sums to {mass[bad[0]]:.6f} after exponentiation")


def collapse(path, blank_index: int) -> list:
    """Merge consecutive repeats, then drop blanks."""
    out = []
    previous = None
    for index in path:
        if index != previous and index != blank_index:
            out.append(index)
        previous = index
    return out


def greedy_decode(matrix: LogitMatrix, word_delimiter: str | None = None) -> str:
    """Per-frame argmax (lowest index wins ties), collapse, join tokens.

    If ``word_delimiter`` is set, that token becomes a space and runs of
    whitespace are squeezed.
    """
    matrix.validate()
    if not len(matrix.values):
        return ""
    path = np.argmax(matrix.values, axis=1).tolist()
    text = "".join(matrix.vocab[i] for i in collapse(path, matrix.blank_index))
    if word_delimiter is not None:
        text = re.sub(r"\s+", " ", text.replace(word_delimiter, " ")).strip()
    return text


def write_logits(path, values, blank_index: int = 0) -> None:
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 2:
        raise MalformedMatrix("logit matrix must be two-dimensional")
    t, v = values.shape
    with open(path, "wb") as handle:
        handle.write(HEADER.pack(MAGIC, t, v, blank_index))
        handle.write(values.tobytes())


def read_logits(path, vocab) -> LogitMatrix:
    data = Path(path).read_bytes()
    if len(data) < HEADER.size:
        raise MalformedMatrix(f"{path}: file shorter than header")
    magic, t, v, blank = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MalformedMatrix(f"{path}: bad magic {magic!r}")
    if v != len(vocab):
        raise MalformedMatrix(f"{path}: {v} columns but vocabulary has {len(vocab)} tokens")
    expected = HEADER.size + 4 * t * v
    if len(data) != expected:
        raise MalformedMatrix(f"{path}: expected {expected} bytes, found {len(data)}")
    values = np.frombuffer(data, dtype="<f4", offset=HEADER.size).reshape(t, v)
    return LogitMatrix(values.astype(np.float64), tuple(vocab), blank)


def load_vocab(path) -> list:
    vocab = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(vocab, list) or not all(isinstance(tok, str) for tok in vocab):
        raise MalformedMatrix(f"{path}: vocabulary must be a JSON list of strings")
    return vocab


def decode_directory(directory, vocab, word_delimiter: str | None = None) -> list:
    """Decode every ``<id>.logits`` file under ``directory``; returns (id, text) sorted by id."""
    out = []
    for path in sorted(Path(directory).glob("*.logits")):
        out.append((path.stem, greedy_decode(read_logits(path, vocab), word_delimiter)))
    return out
