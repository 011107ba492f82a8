"""Synthetic miniature corpora and an end-to-end dry run of the toolkit.

Nothing here models real accents. The corpora exist so that every pipeline
stage can run on a laptop in seconds, and the "model outputs" are simulated
logit matrices whose error rate depends on how much matching data a recipe
contains.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from . import ctc, manifest as mf, metrics, mixer, report
from .audio import AudioBuffer, read_wav, write_wav
from .augment import TdAugmentConfig, apply_td_augment
from .mcadams import augment_corpus

log = logging.getLogger(__name__)

CORPORA = {
    # tag: (accent, formant shift factor)
    "CV": ("none", 1.00),
    "AAF": ("African", 0.92),
    "CaFE": ("Quebec", 1.06),
    "CFPB": ("Belgian", 1.12),
}
WORDS = ("bonjour", "merci", "maison", "soleil", "chat", "rouge", "demain", "petit",
         "ville", "temps", "l'eau", "peut-être", "très", "bien", "c'est", "nous")
VOWEL_FORMANTS = ((730, 1090, 2440), (270, 2290, 3010), (300, 870, 2240), (530, 1840, 2480))
VOCAB = ["<blank>", "|"] + sorted(set("".join(WORDS).replace("-", "")) | {"-"})


def _resonator(freq, bandwidth, rate):
    r = np.exp(-np.pi * bandwidth / rate)
    return [1.0, -2.0 * r * np.cos(2 * np.pi * freq / rate), r * r]


def synth_utterance(rng, rate, f0, shift, seconds):
    """Glottal pulse train through vowel formant resonators, one vowel per 150 ms."""
    n = int(seconds * rate)
    out = np.zeros(n)
    segment = int(0.15 * rate)
    for start in range(0, n, segment):
        stop = min(start + segment, n)
        pulses = np.zeros(stop - start)
        period = int(rate / (f0 * rng.uniform(0.95, 1.05)))
        pulses[::period] = 1.0
        pulses += 0.02 * rng.standard_normal(len(pulses))
        formants = VOWEL_FORMANTS[rng.integers(len(VOWEL_FORMANTS))]
        y = pulses
        for freq in formants:
            y = lfilter([1.0], _resonator(freq * shift, 80.0, rate), y)
        out[start:stop] = y * np.hanning(len(y))
    return 0.3 * out / (np.max(np.abs(out)) + 1e-12)


def make_corpora(out_dir, seed=42, speakers=20, utts_per_speaker=2, seconds=1.5, rate=16000) -> dict:
    """Write one-minute toy corpora (20 speakers x 2 x 1.5 s by default)."""
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    corpora = {}
    for tag, (accent, shift) in CORPORA.items():
        audio_dir = out_dir / tag
        audio_dir.mkdir(parents=True, exist_ok=True)
        records = []
        for s in range(speakers):
            speaker = f"{tag.lower()}_spk{s:02d}"
            f0 = rng.uniform(90, 240)
            for u in range(utts_per_speaker):
                utt_id = f"{speaker}_u{u}"
                samples = synth_utterance(rng, rate, f0, shift, seconds)
                write_wav(AudioBuffer(samples, rate), audio_dir / f"{utt_id}.wav")
                text = " ".join(rng.choice(WORDS, size=rng.integers(3, 7)))
                records.append(mf.UtteranceRecord(
                    utt_id, f"{tag}/{utt_id}.wav", len(samples) / rate, text, speaker, tag, accent
                ))
        manifest = mf.Manifest(tuple(records), out_dir)
        mf.save_manifest(manifest, out_dir / f"{tag}.jsonl")
        corpora[tag] = mf.load_manifest(out_dir / f"{tag}.jsonl")
    return corpora


def simulated_logits(text, rng, error_rate):
    """Character log-probabilities whose best path spells ``text`` with random corruption."""
    chars = [c if c in VOCAB else "|" for c in "|".join(mf.normalize_transcript(text))]
    frames = []
    for c in chars:
        target = VOCAB.index(c)
        if rng.random() < error_rate:
            target = int(rng.integers(1, len(VOCAB)))
        frames.extend([target, target, 0])
    logits = rng.normal(0.0, 0.1, size=(len(frames), len(VOCAB)))
    logits[np.arange(len(frames)), frames] += 6.0
    return logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))


def _coverage_error(recipe, testset, corpora_hours):
    """Toy error model: more hours of the matching domain means fewer errors."""
    seen = 0.0
    total = 0.0
    for component in recipe.components:
        hours = component.hours if component.hours is not None else corpora_hours.get(component.corpus, 0.0)
        total += hours
        if component.corpus.split("_")[0].replace("aug", "") == testset:
            seen += hours
    share = seen / total if total else 0.0
    return 0.003 + 0.03 * (1.0 - share)


def run_demo(out_dir, seed: int = 42) -> dict:
    """augment -> split -> mix -> decode -> wer -> report on toy corpora.

    Returns the paths of the main artifacts.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    corpora = make_corpora(out_dir / "corpora", seed=seed)

    (out_dir / "splits").mkdir(exist_ok=True)
    sizes = {}
    splits = {}
    for tag in ("CV", "AAF", "CFPB"):
        hours = corpora[tag].duration_s / 3600.0
        targets = [("train", 0.6 * hours), ("dev", 0.2 * hours), ("test", 0.2 * hours)]
        parts = mf.speaker_disjoint_split(corpora[tag], targets, seed=seed)
        for name, part in parts.items():
            if len(part):
                mf.save_manifest(part, out_dir / "splits" / f"{tag}_{name}.jsonl")
        splits[tag] = parts
        sizes[tag] = parts["train"].duration_s / 3600.0
    splits["CaFE"] = {"test": corpora["CaFE"]}

    augmented = augment_corpus(splits["AAF"]["train"], (0.7, 0.8, 0.9, 1.0), out_dir / "aafaug").manifest
    mf.save_manifest(augmented, out_dir / "aafaug" / "AAFaug.jsonl")

    specaug_cfg = TdAugmentConfig(master_seed=seed)
    first = splits["CV"]["train"].records[0]
    buffer = apply_td_augment(read_wav(splits["CV"]["train"].resolve(first)), first.id, specaug_cfg)
    write_wav(buffer, out_dir / "specaug_example.wav")

    validation = mixer.build_validation_set(
        splits["CV"]["dev"], splits["AAF"]["dev"], seed=seed,
        hours_each=min(splits["CV"]["dev"].duration_s, splits["AAF"]["dev"].duration_s) / 3600.0,
    )
    mf.save_manifest(validation, out_dir / "splits" / "validation.jsonl")

    recipes = mixer.build_cv_series(sizes["CV"], sizes["AAF"])
    recipes = [r for r in recipes if r.name != "FullCV"]
    by_name = {r.name: r for r in recipes}
    recipes.append(mixer.union_recipe(by_name["CV-90"], "CFPB"))
    recipes.append(mixer.union_recipe(by_name["CV-100"], "AAFaug"))
    mixer.save_recipes(recipes, out_dir / "recipes.json")

    train_corpora = {"CV": splits["CV"]["train"], "AAF": splits["AAF"]["train"],
                     "CFPB": splits["CFPB"]["train"], "AAFaug": augmented}
    corpora_hours = {k: v.duration_s / 3600.0 for k, v in train_corpora.items()}
    (out_dir / "train").mkdir(exist_ok=True)
    results = []
    for index, recipe in enumerate(recipes):
        train = mixer.realize_recipe(recipe, train_corpora, seed=seed)
        mf.save_manifest(train, out_dir / "train" / f"{recipe.name}.jsonl")
        per_test = {}
        for testset in ("CV", "AAF", "CFPB", "CaFE"):
            test = splits[testset]["test"]
            rng = np.random.default_rng([seed, index, list(CORPORA).index(testset)])
            error_rate = _coverage_error(recipe, testset, corpora_hours)
            logit_dir = out_dir / "logits" / recipe.name / testset
            logit_dir.mkdir(parents=True, exist_ok=True)
            for record in test.records:
                ctc.write_logits(logit_dir / f"{record.id}.logits", simulated_logits(record.transcript, rng, error_rate))
            hyps = dict(ctc.decode_directory(logit_dir, VOCAB, word_delimiter="|"))
            scored = metrics.corpus_wer((r.id, r.transcript, hyps.get(r.id, "")) for r in test.records)
            per_test[testset] = round(scored.wer, 2)
        results.append(report.ExperimentResult(recipe.name, per_test, recipe.nominal_cv_proportion))

    (out_dir / "vocab.json").write_text(json.dumps(VOCAB, ensure_ascii=False) + "\n", encoding="utf-8")
    report.save_results(results, out_dir / "results.json")
    table = report.summary_table(results)
    (out_dir / "table.txt").write_text(table.to_text(), encoding="utf-8")
    (out_dir / "scatter.csv").write_text(report.tradeoff_scatter(results, "CV", "AAF"), encoding="utf-8")
    (out_dir / "curve_AAF.csv").write_text(report.proportion_curve(results, "AAF"), encoding="utf-8")
    return {
        "results": out_dir / "results.json",
        "table": out_dir / "table.txt",
        "scatter": out_dir / "scatter.csv",
        "curve": out_dir / "curve_AAF.csv",
    }
