"""``accentmix`` command line.

Exit status: 0 on success, 1 on operational errors (bad input data, I/O),
2 on usage errors. Diagnostics go to stderr; data goes to files or stdout.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import click

from . import __version__
from . import ctc, manifest as mf, metrics, mixer, report
from .audio import read_wav, write_wav
from .augment import TdAugmentConfig, apply_td_augment
from .errors import AccentmixError
from .mcadams import augment_corpus

log = logging.getLogger("accentmix")

DEFAULT_SEED = 42


def _parse_floats(value: str, name: str) -> list:
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}", param_hint=name)


def _parse_range(value: str, name: str, cast=float) -> tuple:
    parts = value.replace(":", ",").split(",")
    try:
        low, high = (cast(p) for p in parts) if len(parts) == 2 else (cast(parts[0]),) * 2
    except ValueError:
        raise click.BadParameter(f"expected MIN,MAX, got {value!r}", param_hint=name)
    return low, high


def _guard_output(out, *inputs) -> None:
    out = os.path.abspath(out)
    for path in inputs:
        if path is not None and os.path.abspath(path) == out:
            raise click.UsageError(f"output {out} would overwrite an input file")


def _seed(ctx, seed):
    return ctx.obj["seed"] if seed is None else seed


def _write_text(text: str, out) -> None:
    if out is None:
        click.echo(text, nl=False)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _dump_json(obj, out) -> None:
    _write_text(json.dumps(obj, indent=2, ensure_ascii=False) + "\n", out)


class _Group(click.Group):
    def resolve_command(self, ctx, args):
        # Print the subgroup help, not just the usage line, on usage errors.
        try:
            return super().resolve_command(ctx, args)
        except click.UsageError as exc:
            exc.ctx = ctx
            raise


@click.group(cls=_Group, context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="accentmix")
@click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True,
              help="Default seed for subcommands that take --seed.")
@click.option("--workers", type=int, default=1, show_default=True,
              help="Worker processes for batch audio jobs; 0 means one per CPU.")
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
@click.pass_context
def cli(ctx, seed, workers, verbose):
    """Accent-robust ASR data toolkit: augmentation, mixing, scoring, reports."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s", force=True)
    if workers < 1:
        workers = os.cpu_count() or 1
    ctx.obj = {"seed": seed, "workers": workers}


# ---------------------------------------------------------------- augment

@cli.group(cls=_Group)
def augment():
    """Create augmented copies of a corpus."""


@augment.command("mcadams")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--alphas", default="0.7,0.8,0.9,1.0", show_default=True, help="Comma-separated McAdams coefficients.")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--out-manifest", required=True, type=click.Path(dir_okay=False))
@click.option("--lpc-order", type=int, default=None, help="Default: sample_rate/1000 + 4.")
@click.option("--frame-ms", type=float, default=20.0, show_default=True)
@click.option("--hop-ms", type=float, default=10.0, show_default=True)
@click.option("--angle-floor", type=float, default=0.02, show_default=True, help="Radians.")
@click.pass_context
def augment_mcadams(ctx, manifest_path, alphas, out_dir, out_manifest, lpc_order, frame_ms, hop_ms, angle_floor):
    """One McAdams-transformed copy of every utterance per alpha."""
    _guard_output(out_manifest, manifest_path)
    alpha_list = _parse_floats(alphas, "--alphas")
    if not alpha_list:
        raise click.BadParameter("at least one alpha is required", param_hint="--alphas")
    source = mf.load_manifest(manifest_path)
    result = augment_corpus(
        source, alpha_list, out_dir, workers=ctx.obj["workers"],
        lpc_order=lpc_order, frame_ms=frame_ms, hop_ms=hop_ms, angle_floor=angle_floor,
    )
    mf.save_manifest(result.manifest, out_manifest)
    log.warning("wrote %d records (%d failed, %d frames passed through)",
                len(result.manifest), len(result.failures), result.fallback_frames)
    if result.failures:
        for utt_id, message in result.failures:
            click.echo(f"failed: {utt_id}: {message}", err=True)
        ctx.exit(1)


def _specaug_one(job):
    source, target, utt_id, config = job
    out = apply_td_augment(read_wav(source), utt_id, config)
    write_wav(out, target)
    return out.duration_s


@augment.command("specaug")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None, help="Master seed (default: global --seed).")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--out-manifest", required=True, type=click.Path(dir_okay=False))
@click.option("--speeds", default="0.95,1.0,1.05", show_default=True)
@click.option("--chunks", default="1,5", show_default=True, help="MIN,MAX dropped chunks.")
@click.option("--chunk-ms", default="50,100", show_default=True, help="MIN,MAX chunk length.")
@click.option("--bands", default="1,3", show_default=True, help="MIN,MAX dropped frequency bands.")
@click.option("--band-width-hz", type=float, default=200.0, show_default=True)
@click.pass_context
def augment_specaug(ctx, manifest_path, seed, out_dir, out_manifest, speeds, chunks, chunk_ms, bands, band_width_hz):
    """Waveform SpecAugment (speed, chunk drop, band drop), seeded per utterance."""
    _guard_output(out_manifest, manifest_path)
    config = TdAugmentConfig(
        tuple(_parse_floats(speeds, "--speeds")),
        _parse_range(chunks, "--chunks", int),
        _parse_range(chunk_ms, "--chunk-ms"),
        _parse_range(bands, "--bands", int),
        band_width_hz,
        _seed(ctx, seed),
    )
    source = mf.load_manifest(manifest_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs, records = [], []
    for record in source.records:
        new_id = f"{record.id}__specaug"
        target = out_dir / f"{new_id.replace('/', '_')}.wav"
        jobs.append((str(source.resolve(record)), str(target), record.id, config))
        records.append(replace(record, id=new_id, audio_path=target.name))
    if ctx.obj["workers"] > 1 and len(jobs) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(ctx.obj["workers"]) as pool:
            durations = list(pool.map(_specaug_one, jobs))
    else:
        durations = [_specaug_one(job) for job in jobs]
    records = [replace(r, duration_s=d) for r, d in zip(records, durations)]
    mf.save_manifest(mf.Manifest(tuple(records), out_dir), out_manifest)


# --------------------------------------------------------------- manifest

@cli.group("manifest", cls=_Group)
def manifest_group():
    """Inspect, split and normalize manifests."""


@manifest_group.command("stats")
@click.option("--manifest", "manifest_paths", required=True, multiple=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.option("--verify", is_flag=True, help="Check stored durations against the WAV headers.")
def manifest_stats(manifest_paths, as_json, verify):
    """Duration (H:MM), utterance and speaker counts, per corpus and overall."""
    merged = mf.concat([mf.load_manifest(p, verify=verify) for p in manifest_paths])
    stats = mf.compute_stats(merged)
    if as_json:
        _dump_json(stats.to_json(), None)
        return
    rows = [(name, s) for name, s in stats.per_corpus.items()] + [("total", stats)]
    click.echo(f"{'corpus':<10} {'duration':>9} {'#utt':>8} {'#spk':>6}")
    for name, s in rows:
        click.echo(f"{name:<10} {mf.format_hm(s.total_duration_s):>9} {s.utterance_count:>8} {s.speaker_count:>6}")


@manifest_group.command("split")
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--target", "targets", required=True, multiple=True, help="NAME=HOURS, repeatable (e.g. train=8).")
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=None)
@click.option("--tolerance", type=float, default=0.10, show_default=True, help="Allowed relative deviation.")
@click.pass_context
def manifest_split(ctx, manifest_path, targets, out_dir, seed, tolerance):
    """Speaker-disjoint split into NAME.jsonl files (leftovers in remainder.jsonl)."""
    parsed = []
    for item in targets:
        name, sep, hours = item.partition("=")
        try:
            parsed.append((name, float(hours)))
        except ValueError:
            raise click.BadParameter(f"expected NAME=HOURS, got {item!r}", param_hint="--target")
        if not sep or not name:
            raise click.BadParameter(f"expected NAME=HOURS, got {item!r}", param_hint="--target")
    source = mf.load_manifest(manifest_path)
    parts = mf.speaker_disjoint_split(source, parsed, seed=_seed(ctx, seed), tolerance=tolerance)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in parts.items():
        target = out_dir / f"{name}.jsonl"
        _guard_output(target, manifest_path)
        mf.save_manifest(part, target)
        log.info("%s: %.3f h, %d speakers", name, part.duration_s / 3600, len(part.speakers))


@manifest_group.command("normalize")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False))
@click.option("--text", help="Normalize a single string and print its tokens.")
def manifest_normalize(manifest_path, out, text):
    """Rewrite transcripts in normalized form (lowercase, no punctuation)."""
    if text is not None:
        click.echo(" ".join(mf.normalize_transcript(text)))
        return
    if manifest_path is None or out is None:
        raise click.UsageError("give either --text or both --manifest and --out")
    _guard_output(out, manifest_path)
    source = mf.load_manifest(manifest_path)
    records = [replace(r, transcript=" ".join(mf.normalize_transcript(r.transcript))) for r in source.records]
    mf.save_manifest(source.subset(records), out)


# -------------------------------------------------------------------- mix

@cli.group(cls=_Group)
def mix():
    """Training-set recipes and their realization."""


@mix.command("series")
@click.option("--cv-hours", type=float, required=True, help="CV train split size.")
@click.option("--aaf-hours", type=float, required=True, help="AAF train split size.")
@click.option("--full-cv-hours", type=float, default=None, help="Size of all CV splits together (FullCV).")
@click.option("--out", type=click.Path(dir_okay=False), help="Recipe JSON (default: stdout).")
def mix_series(cv_hours, aaf_hours, full_cv_hours, out):
    """The CV-0 .. CV-100 and FullCV recipes."""
    recipes = mixer.build_cv_series(cv_hours, aaf_hours, full_cv_hours)
    _dump_json([r.to_json() for r in recipes], out)


@mix.command("fixed")
@click.option("--total-hours", type=float, default=31.0, show_default=True)
@click.option("--step", type=float, default=0.1, show_default=True)
@click.option("--cv-hours", type=float, default=None, help="Available CV hours; caps the CV share.")
@click.option("--out", type=click.Path(dir_okay=False))
def mix_fixed(total_hours, step, cv_hours, out):
    """Fixed-size series replacing augmented accented data with CV."""
    recipes = mixer.build_fixed_hours_series(total_hours, step, cv_available_hours=cv_hours)
    _dump_json([r.to_json() for r in recipes], out)


@mix.command("union")
@click.option("--recipes", "recipe_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--name", "names", multiple=True, help="Base recipe name(s); default all.")
@click.option("--corpus", required=True, help="Corpus tag to add.")
@click.option("--hours", type=float, default=None, help="Hours to take (default: whole corpus).")
@click.option("--out", type=click.Path(dir_okay=False))
def mix_union(recipe_path, names, corpus, hours, out):
    """Add a third corpus to existing recipes (e.g. CV-90 + CFPB)."""
    recipes = mixer.load_recipes(recipe_path)
    if names:
        known = {r.name for r in recipes}
        missing = [n for n in names if n not in known]
        if missing:
            raise click.BadParameter(f"unknown recipe(s) {missing}", param_hint="--name")
        recipes = [r for r in recipes if r.name in names]
    _dump_json([mixer.union_recipe(r, corpus, hours).to_json() for r in recipes], out)


def _parse_corpora(items) -> dict:
    corpora = {}
    for item in items:
        tag, sep, paths = item.partition("=")
        if not sep or not tag or not paths:
            raise click.BadParameter(f"expected TAG=FILE[,FILE...], got {item!r}", param_hint="--corpus")
        corpora[tag] = mf.concat([mf.load_manifest(p) for p in paths.split(",")])
    return corpora


@mix.command("realize")
@click.option("--recipe", "recipe_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--name", default=None, help="Recipe to realize when the file holds several.")
@click.option("--corpus", "corpus_items", multiple=True, required=True, help="TAG=FILE[,FILE...], repeatable.")
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def mix_realize(ctx, recipe_path, name, corpus_items, seed, out):
    """Select utterances for one recipe and write the training manifest."""
    recipes = mixer.load_recipes(recipe_path)
    if name is not None:
        recipes = [r for r in recipes if r.name == name]
        if not recipes:
            raise click.BadParameter(f"no recipe named {name!r}", param_hint="--name")
    elif len(recipes) != 1:
        raise click.UsageError(f"{recipe_path} holds {len(recipes)} recipes; pick one with --name")
    for item in corpus_items:
        _guard_output(out, *item.partition("=")[2].split(","))
    train = mixer.realize_recipe(recipes[0], _parse_corpora(corpus_items), seed=_seed(ctx, seed))
    mf.save_manifest(train, out)
    log.info("%s: %.3f h, %d utterances", recipes[0].name, train.duration_s / 3600, len(train))


@mix.command("validation")
@click.option("--cv-dev", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--aaf-dev", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--hours-each", type=float, default=2.5, show_default=True)
@click.option("--check", "train_paths", multiple=True, type=click.Path(exists=True, dir_okay=False),
              help="Training manifest that must share no speaker with the result; repeatable.")
@click.option("--seed", type=int, default=None)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.pass_context
def mix_validation(ctx, cv_dev, aaf_dev, hours_each, train_paths, seed, out):
    """Balanced validation set, half CV and half AAF."""
    _guard_output(out, cv_dev, aaf_dev, *train_paths)
    dev = mixer.build_validation_set(mf.load_manifest(cv_dev), mf.load_manifest(aaf_dev),
                                     seed=_seed(ctx, seed), hours_each=hours_each)
    mf.save_manifest(dev, out)
    violations = 0
    for path in train_paths:
        shared = mf.speaker_overlap(dev, mf.load_manifest(path))
        if shared:
            violations += 1
            click.echo(f"speaker overlap with {path}: {', '.join(shared)}", err=True)
    if violations:
        ctx.exit(1)


# ------------------------------------------------------------------- eval

def _load_transcripts(path, who) -> dict:
    out = {}
    with open(path, encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out[obj["id"]] = (obj["transcript"], obj.get("corpus"))
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise AccentmixError(f"{path}: line {number}: bad {who} record ({exc})") from exc
    return out


@cli.group("eval", cls=_Group)
def eval_group():
    """Scoring."""


@eval_group.command("wer")
@click.option("--refs", required=True, type=click.Path(exists=True, dir_okay=False), help="JSONL with id, transcript.")
@click.option("--hyps", required=True, type=click.Path(exists=True, dir_okay=False), help="JSONL with id, transcript.")
@click.option("--out", type=click.Path(dir_okay=False), help="Report JSON (default: stdout).")
@click.option("--unit", type=click.Choice(["word", "char"]), default="word", show_default=True)
def eval_wer(refs, hyps, out, unit):
    """Pooled WER (or CER) overall and per corpus; missing hypotheses count as empty."""
    ref_map = _load_transcripts(refs, "reference")
    hyp_map = _load_transcripts(hyps, "hypothesis")
    missing = [k for k in ref_map if k not in hyp_map]
    extra = [k for k in hyp_map if k not in ref_map]
    if missing:
        log.warning("%d references have no hypothesis; scored as empty", len(missing))
    if extra:
        log.warning("%d hypotheses have no reference; ignored", len(extra))
    triples = [(k, text, hyp_map.get(k, ("", None))[0]) for k, (text, _) in ref_map.items()]
    overall = metrics.corpus_wer(triples, unit=unit)
    by_corpus = {}
    for score in overall.per_utterance:
        corpus = ref_map[score.id][1]
        if corpus is not None:
            by_corpus.setdefault(corpus, []).append(score)
    result = {"unit": unit, "overall": overall.to_json()}
    if by_corpus:
        result["by_corpus"] = {}
        for corpus in sorted(by_corpus):
            pooled = metrics.pool(by_corpus[corpus]).to_json()
            pooled.pop("per_utterance")
            result["by_corpus"][corpus] = pooled
    _dump_json(result, out)
    log.warning("%s %.2f over %d utterances", "WER" if unit == "word" else "CER",
                overall.wer, len(overall.per_utterance))


# ----------------------------------------------------------------- decode

@cli.group(cls=_Group)
def decode():
    """Turn model outputs into transcripts."""


@decode.command("greedy")
@click.option("--logits", required=True, type=click.Path(exists=True, file_okay=False), help="Directory of <id>.logits.")
@click.option("--vocab", required=True, type=click.Path(exists=True, dir_okay=False), help="JSON list of tokens.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--word-delimiter", default=None, help="Token that stands for a space, e.g. '|'.")
def decode_greedy(logits, vocab, out, word_delimiter):
    """Best-path CTC decoding to a hypothesis JSONL."""
    hyps = ctc.decode_directory(logits, ctc.load_vocab(vocab), word_delimiter)
    with open(out, "w", encoding="utf-8", newline="\n") as handle:
        for utt_id, text in hyps:
            handle.write(json.dumps({"id": utt_id, "transcript": text}, ensure_ascii=False) + "\n")


# ----------------------------------------------------------------- report

@cli.group("report", cls=_Group)
def report_group():
    """Tables and plot data from experiment results."""


_results_option = click.option("--results", required=True, type=click.Path(exists=True, dir_okay=False),
                               help="JSON list of experiment results.")
_out_option = click.option("--out", type=click.Path(dir_okay=False), help="Output file (default: stdout).")


@report_group.command("table")
@_results_option
@click.option("--format", "fmt", type=click.Choice(["text", "csv", "json"]), default="text", show_default=True)
@click.option("--testset", "testsets", multiple=True, help="Column order; default all found.")
@_out_option
def report_table(results, fmt, testsets, out):
    """WER per train set and test set; column minima marked."""
    table = report.summary_table(report.load_results(results), list(testsets) or None)
    if fmt == "json":
        _dump_json(table.to_json(), out)
    else:
        _write_text(table.to_text() if fmt == "text" else table.to_csv(), out)


@report_group.command("scatter")
@_results_option
@click.option("--x", "x_testset", default="CV", show_default=True)
@click.option("--y", "y_testset", default="AAF", show_default=True)
@_out_option
def report_scatter(results, x_testset, y_testset, out):
    """Trade-off points (WER on one test set against another), CSV."""
    _write_text(report.tradeoff_scatter(report.load_results(results), x_testset, y_testset), out)


@report_group.command("curve")
@_results_option
@click.option("--testset", required=True)
@_out_option
def report_curve(results, testset, out):
    """WER against CV proportion, CSV."""
    _write_text(report.proportion_curve(report.load_results(results), testset), out)


# ------------------------------------------------------------------- demo

@cli.command()
@click.option("--out-dir", required=True, type=click.Path(file_okay=False))
@click.option("--seed", type=int, default=None)
@click.pass_context
def demo(ctx, out_dir, seed):
    """End-to-end dry run on generated one-minute corpora."""
    from .demo import run_demo

    paths = run_demo(out_dir, seed=_seed(ctx, seed))
    click.echo(Path(paths["table"]).read_text(encoding="utf-8"), nl=False)


def main(argv=None) -> int:
    try:
        # Without standalone mode click returns ctx.exit() codes instead of raising.
        code = cli.main(args=argv, prog_name="accentmix", standalone_mode=False)
    except click.exceptions.NoArgsIsHelpError as exc:
        click.echo(exc.format_message(), err=True)
        return 2
    except click.UsageError as exc:
        if exc.ctx is not None:
            click.echo(exc.ctx.get_help(), err=True)
            click.echo("", err=True)
        click.echo(f"Error: {exc.format_message()}", err=True)
        return 2
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return 1
    except click.ClickException as exc:
        exc.show()
        return 1
    except (AccentmixError, OSError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    return code if isinstance(code, int) else 0


if __name__ == "__main__":
    sys.exit(main())
