import hashlib
import json
import subprocess
import sys

import numpy as np
import pytest

from accentmix import __version__
from accentmix.audio import write_wav
from accentmix.cli import main
from accentmix.ctc import write_logits
from accentmix.manifest import Manifest, load_manifest, save_manifest
from accentmix.report import ExperimentResult, save_results

from conftest import make_record, voiced_signal


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def digest(path):
    return hashlib.sha256(path.read_bytes()).hexdigest()


@pytest.fixture
def corpus(tmp_path):
    rng = np.random.default_rng(0)
    audio = tmp_path / "corpus"
    audio.mkdir()
    records = []
    for s in range(6):
        for u in range(2):
            x = voiced_signal(rng, seconds=0.25)
            name = f"s{s}u{u}"
            write_wav(x, audio / f"{name}.wav")
            records.append(make_record(name, f"spk{s}", x.duration_s, "AAF", "African",
                                       transcript=f"Mot{s} numéro {u}.", path=f"{name}.wav"))
    save_manifest(Manifest(tuple(records), audio), audio / "m.jsonl")
    return audio / "m.jsonl"


def test_series_example(capsys):
    code, out, _ = run(["mix", "series", "--cv-hours", "30.87", "--aaf-hours", "7.97"], capsys)
    assert code == 0
    recipes = {r["name"]: r for r in json.loads(out)}
    cv50 = recipes["CV-50"]["components"][0]
    assert cv50["corpus"] == "CV" and round(cv50["hours"], 2) == 7.97


def test_no_arguments(capsys):
    code, out, err = run([], capsys)
    assert code == 2 and out == ""
    assert "Usage:" in err


def test_unknown_flag(capsys):
    code, out, err = run(["mix", "series", "--frobnicate"], capsys)
    assert code == 2 and "--frobnicate" in err and out == ""


def test_usage_error_prints_subcommand_help(capsys):
    code, _, err = run(["report", "table"], capsys)
    assert code == 2 and "--results" in err and "Usage: accentmix report table" in err


def test_version_and_help(capsys):
    assert run(["--version"], capsys)[0:2] == (0, f"accentmix, version {__version__}\n")
    code, out, _ = run(["--help"], capsys)
    assert code == 0 and "default:" in out and "42" in out


def test_console_script_exit_codes(tmp_path):
    done = subprocess.run([sys.executable, "-m", "accentmix.cli", "--bogus"], capture_output=True, text=True)
    assert done.returncode == 2 and "--bogus" in done.stderr


def test_operational_error_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"id": "x"}\n')
    code, _, err = run(["manifest", "stats", "--manifest", str(bad)], capsys)
    assert code == 1 and "missing field" in err


def test_manifest_stats(corpus, capsys):
    code, out, _ = run(["manifest", "stats", "--manifest", str(corpus)], capsys)
    assert code == 0 and "AAF" in out and "total" in out
    code, out, _ = run(["manifest", "stats", "--manifest", str(corpus), "--json", "--verify"], capsys)
    assert json.loads(out)["utterances"] == 12 and json.loads(out)["speakers"] == 6


def test_manifest_split_and_normalize(corpus, tmp_path, capsys):
    hours = load_manifest(corpus).duration_s / 3600
    code, _, _ = run(["manifest", "split", "--manifest", str(corpus), "--out-dir", str(tmp_path / "s"),
                      "--target", f"train={hours * 0.5}", "--target", f"test={hours * 0.33}"], capsys)
    assert code == 0
    train, test = load_manifest(tmp_path / "s" / "train.jsonl"), load_manifest(tmp_path / "s" / "test.jsonl")
    assert not train.speakers & test.speakers
    assert train.resolve(train.records[0]).exists()
    code, _, _ = run(["manifest", "normalize", "--manifest", str(corpus), "--out", str(tmp_path / "n.jsonl")], capsys)
    assert code == 0
    assert load_manifest(tmp_path / "n.jsonl").records[0].transcript == "mot0 numéro 0"
    code, out, _ = run(["manifest", "normalize", "--text", "Peut-être, là !"], capsys)
    assert out == "peut-être là\n"
    code, _, _ = run(["manifest", "split", "--manifest", str(corpus), "--out-dir", str(tmp_path), "--target", "x"],
                     capsys)
    assert code == 2


def test_augment_commands(corpus, tmp_path, capsys):
    before = digest(corpus)
    out_manifest = tmp_path / "aug.jsonl"
    argv = ["augment", "mcadams", "--manifest", str(corpus), "--alphas", "0.8,1.0",
            "--out-dir", str(tmp_path / "mc"), "--out-manifest", str(out_manifest)]
    assert run(argv, capsys)[0] == 0
    augmented = load_manifest(out_manifest)
    assert len(augmented) == 24 and augmented.records[0].id == "s0u0__mcadams0.80"
    assert augmented.resolve(augmented.records[0]).exists()

    spec = ["augment", "specaug", "--manifest", str(corpus), "--out-dir", str(tmp_path / "sa"),
            "--out-manifest", str(tmp_path / "sa.jsonl")]
    assert run(spec, capsys)[0] == 0
    sa = load_manifest(tmp_path / "sa.jsonl", verify=True)
    assert sa.records[0].id == "s0u0__specaug" and len(sa) == 12
    assert digest(corpus) == before


def test_refuses_to_overwrite_input(corpus, tmp_path, capsys):
    code, _, err = run(["manifest", "normalize", "--manifest", str(corpus), "--out", str(corpus)], capsys)
    assert code == 2 and "overwrite" in err


def _write_jsonl(path, rows):
    path.write_text("".join(json.dumps(r, ensure_ascii=False) + "\n" for r in rows), encoding="utf-8")


def test_eval_wer(tmp_path, capsys):
    _write_jsonl(tmp_path / "refs.jsonl", [
        {"id": "a", "transcript": "un deux trois", "corpus": "CV"},
        {"id": "b", "transcript": "quatre cinq", "corpus": "AAF"},
        {"id": "c", "transcript": "six", "corpus": "AAF"},
    ])
    _write_jsonl(tmp_path / "hyps.jsonl", [{"id": "a", "transcript": "un deux"}, {"id": "b", "transcript": "quatre cinq"}])
    code, out, err = run(["eval", "wer", "--refs", str(tmp_path / "refs.jsonl"), "--hyps", str(tmp_path / "hyps.jsonl")],
                         capsys)
    report = json.loads(out)
    assert code == 0 and report["overall"]["wer"] == round(100 * 2 / 6, 2)
    assert report["by_corpus"]["AAF"]["wer"] == round(100 / 3, 2)
    assert "no hypothesis" in err


def test_decode_greedy(tmp_path, capsys):
    vocab = ["_", "|", "o", "k"]
    (tmp_path / "vocab.json").write_text(json.dumps(vocab))
    (tmp_path / "logits").mkdir()
    values = np.full((4, 4), -20.0)
    values[np.arange(4), [2, 3, 1, 2]] = 0.0
    write_logits(tmp_path / "logits" / "u1.logits", values)
    code, _, _ = run(["decode", "greedy", "--logits", str(tmp_path / "logits"), "--vocab", str(tmp_path / "vocab.json"),
                      "--out", str(tmp_path / "h.jsonl"), "--word-delimiter", "|"], capsys)
    assert code == 0
    assert json.loads((tmp_path / "h.jsonl").read_text()) == {"id": "u1", "transcript": "ok o"}


def test_report_commands(tmp_path, capsys):
    save_results([ExperimentResult("CV", {"CV": 9.5, "AAF": 18.71}, 1.0),
                  ExperimentResult("CV-90", {"CV": 9.37, "AAF": 8.25}, 0.9)], tmp_path / "r.json")
    code, out, _ = run(["report", "table", "--results", str(tmp_path / "r.json")], capsys)
    assert code == 0 and "9.37*" in out
    code, out, _ = run(["report", "scatter", "--results", str(tmp_path / "r.json")], capsys)
    assert out.splitlines()[1] == "CV,9.5,18.71"
    code, out, _ = run(["report", "curve", "--results", str(tmp_path / "r.json"), "--testset", "AAF"], capsys)
    assert out.splitlines()[1] == "0.9,8.25,CV-90"
    code, _, err = run(["report", "scatter", "--results", str(tmp_path / "r.json"), "--y", "CaFE"], capsys)
    assert code == 1 and "CaFE" in err


def _train_fixture(tmp_path):
    cv = Manifest(tuple(make_record(f"cv{i}", f"cvs{i % 40}", 30.0) for i in range(400)), tmp_path)
    aaf = Manifest(tuple(make_record(f"af{i}", f"afs{i % 20}", 30.0, "AAF") for i in range(200)), tmp_path)
    save_manifest(cv, tmp_path / "cv.jsonl")
    save_manifest(aaf, tmp_path / "aaf.jsonl")
    return cv, aaf


def test_mix_realize_deterministic(tmp_path, capsys):
    _train_fixture(tmp_path)
    assert run(["mix", "series", "--cv-hours", "3.33", "--aaf-hours", "1.66", "--out", str(tmp_path / "r.json")],
               capsys)[0] == 0
    outputs = []
    for name in ("a.jsonl", "b.jsonl"):
        code, _, _ = run(["--seed", "7", "mix", "realize", "--recipe", str(tmp_path / "r.json"), "--name", "CV-50",
                          "--corpus", f"CV={tmp_path / 'cv.jsonl'}", "--corpus", f"AAF={tmp_path / 'aaf.jsonl'}",
                          "--out", str(tmp_path / name)], capsys)
        assert code == 0
        outputs.append((tmp_path / name).read_bytes())
    assert outputs[0] == outputs[1]
    realized = load_manifest(tmp_path / "a.jsonl")
    assert abs(sum(r.duration_s for r in realized if r.corpus == "CV") - 1.66 * 3600) <= 120
    code, _, err = run(["mix", "realize", "--recipe", str(tmp_path / "r.json"), "--corpus",
                        f"CV={tmp_path / 'cv.jsonl'}", "--out", str(tmp_path / "c.jsonl")], capsys)
    assert code == 2 and "--name" in err


def test_mix_union_and_fixed(tmp_path, capsys):
    run(["mix", "series", "--cv-hours", "30.87", "--aaf-hours", "7.97", "--out", str(tmp_path / "r.json")], capsys)
    code, out, _ = run(["mix", "union", "--recipes", str(tmp_path / "r.json"), "--name", "CV-90", "--corpus", "CFPB"],
                       capsys)
    assert code == 0 and json.loads(out)[0]["name"] == "CV-90+CFPB"
    code, out, _ = run(["mix", "fixed", "--total-hours", "31"], capsys)
    assert [round(c["hours"], 2) for c in json.loads(out)[1]["components"]] == [3.1, 27.9]


def test_mix_validation_reports_overlap(tmp_path, capsys):
    cv, aaf = _train_fixture(tmp_path)
    leak = Manifest((make_record("t0", "cvs3", 5.0),), tmp_path)
    save_manifest(leak, tmp_path / "train.jsonl")
    base = ["mix", "validation", "--cv-dev", str(tmp_path / "cv.jsonl"), "--aaf-dev", str(tmp_path / "aaf.jsonl"),
            "--hours-each", "1", "--out", str(tmp_path / "dev.jsonl")]
    assert run(base, capsys)[0] == 0
    dev = load_manifest(tmp_path / "dev.jsonl")
    if "cvs3" in dev.speakers:
        code, _, err = run(base + ["--check", str(tmp_path / "train.jsonl")], capsys)
        assert code == 1 and "cvs3" in err
    clean = Manifest((make_record("t0", "nobody", 5.0),), tmp_path)
    save_manifest(clean, tmp_path / "clean.jsonl")
    assert run(base + ["--check", str(tmp_path / "clean.jsonl")], capsys)[0] == 0


def test_mix_validation_always_catches_constructed_collision(tmp_path, capsys):
    _train_fixture(tmp_path)
    base = ["mix", "validation", "--cv-dev", str(tmp_path / "cv.jsonl"), "--aaf-dev", str(tmp_path / "aaf.jsonl"),
            "--hours-each", "1", "--out", str(tmp_path / "dev.jsonl")]
    run(base, capsys)
    speaker = load_manifest(tmp_path / "dev.jsonl").records[0].speaker_id
    save_manifest(Manifest((make_record("t0", speaker, 5.0),), tmp_path), tmp_path / "train.jsonl")
    code, _, err = run(base + ["--check", str(tmp_path / "train.jsonl")], capsys)
    assert code == 1 and speaker in err
