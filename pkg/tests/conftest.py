import math

import numpy as np
import pytest

from accentmix.audio import AudioBuffer
from accentmix.manifest import Manifest, UtteranceRecord


def make_record(utt_id, speaker, duration, corpus="CV", accent="none", transcript="un deux trois", path=None):
    return UtteranceRecord(utt_id, path or f"{utt_id}.wav", duration, transcript, speaker, corpus, accent)


def synthetic_manifest(rng, n_speakers, utts_range=(1, 6), dur_range=(2.0, 8.0), corpus="CV", root=None):
    records = []
    for s in range(n_speakers):
        for u in range(int(rng.integers(utts_range[0], utts_range[1] + 1))):
            records.append(make_record(
                f"{corpus}_{s:04d}_{u:02d}", f"{corpus}_spk{s:04d}",
                round(float(rng.uniform(*dur_range)), 3), corpus,
            ))
    return Manifest(tuple(records), root)


def voiced_signal(rng, seconds=3.0, rate=16000):
    """Pulse train through two resonators plus a little noise: speech-like enough for LPC."""
    from scipy.signal import lfilter

    n = int(seconds * rate)
    x = np.zeros(n)
    x[:: int(rate / rng.uniform(100, 220))] = 1.0
    x += 0.01 * rng.standard_normal(n)
    for freq in rng.uniform([400, 1200], [900, 2500]):
        r = 0.97
        x = lfilter([1.0], [1.0, -2 * r * math.cos(2 * math.pi * freq / rate), r * r], x)
    return AudioBuffer(0.5 * x / np.max(np.abs(x)), rate)


def snr_db(reference, estimate):
    reference = np.asarray(reference)
    noise = reference - np.asarray(estimate)
    return 10 * math.log10(np.sum(reference**2) / max(np.sum(noise**2), 1e-300))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
