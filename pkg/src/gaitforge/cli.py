"""Batch command-line interface.

Every subcommand is deterministic given --seed, writes machine-readable
CSV/JSON artifacts with fixed column orders, and leaves exactly one
manifest.json in its output directory. Exit codes: 0 success, 2 usage,
3 data errors, 4 numerical errors.
"""

import hashlib
import json
import sys
import time
from pathlib import Path

import click
import numpy as np
import pandas as pd

try:
    import tomllib
except ModuleNotFoundError:  # 3.10
    import tomli as tomllib

from . import __version__
from . import classification as clf
from . import discriminativity as disc
from . import experiments as exp
from . import features as feat
from . import representations as reps
from . import synth
from .dataset import class_counts, load_dataset
from .errors import DataError, GaitForgeError, NumericalError
from .preprocess import PreprocessConfig, preprocess_trial

EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _fail(exc, code):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    click.echo(json.dumps(payload), err=True)
    sys.exit(code)


def guarded(fn):
    """Map the exception taxonomy onto exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DataError as exc:
            _fail(exc, EXIT_DATA)
        except (NumericalError, GaitForgeError) as exc:
            _fail(exc, EXIT_NUMERICAL)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def write_manifest(out_dir, command, config, input_paths=(), seed=None):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    hashes = {}
    for p in input_paths:
        p = Path(p)
        if p.is_file():
            hashes[str(p)] = hashlib.sha256(p.read_bytes()).hexdigest()
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "input_hashes": hashes,
        "tool_version": __version__,
        "timestamp_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))


def _load(metadata, recordings, sample_rate):
    return load_dataset(metadata, recordings, sample_rate=sample_rate)


def _extract_cfg(control_side, plate2_ap_offset):
    pre = PreprocessConfig(
        plate_offsets=((0.0, 0.0), (plate2_ap_offset, 0.0))
    )
    return feat.ExtractConfig(preprocess=pre, control_side=control_side)


@click.group()
@click.option("--jobs", "-j", type=int, default=None,
              help="Worker bound for parallel maps (default: GAITFORGE_JOBS or cores).")
@click.pass_context
def main(ctx, jobs):
    """GRF gait analysis pipeline: synthesize, extract, analyze, classify."""
    ctx.ensure_object(dict)
    ctx.obj["jobs"] = jobs


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------


def _config_from_toml(doc):
    classes = {}
    for label, spec in doc["classes"].items():
        classes[label] = synth.ClassSpec(
            n_subjects=int(spec["subjects"]),
            n_sessions=int(spec["sessions"]),
            trials_per_session=int(spec.get("trials_per_session", 8)),
            n_male=spec.get("males"),
            age_mean=float(spec.get("age", [40, 12])[0]),
            age_sd=float(spec.get("age", [40, 12])[1]),
            mass_mean=float(spec.get("mass", [80, 15])[0]),
            mass_sd=float(spec.get("mass", [80, 15])[1]),
        )
    return synth.GeneratorConfig(
        classes=classes,
        seed=int(doc.get("seed", 0)),
        sample_rate=float(doc.get("sample_rate", 500.0)),
        class_sep=float(doc.get("class_sep", 1.0)),
        subject_sd=float(doc.get("subject_sd", 1.0)),
        trial_sd=float(doc.get("trial_sd", 1.0)),
        ripple_bw=float(doc.get("ripple_bw", 0.030)),
    )


def load_preset(name):
    from importlib import resources

    path = resources.files("gaitforge.presets").joinpath(f"{name}.toml")
    if not path.is_file():
        raise click.UsageError(f"unknown preset {name!r}")
    return tomllib.loads(path.read_text())


@main.command("synth")
@click.option("--preset", type=str, default=None, help="Named preset (e.g. paper-shape).")
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="TOML generator config (overrides preset).")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--seed", type=int, default=None)
@click.option("--sample-rate", type=float, default=None)
@click.option("--separability", type=float, default=None)
@guarded
def synth_cmd(preset, config_path, out_dir, seed, sample_rate, separability):
    """Write a synthetic corpus (metadata.csv + per-trial recordings)."""
    if config_path:
        doc = tomllib.loads(Path(config_path).read_text())
    elif preset:
        doc = load_preset(preset)
    else:
        raise click.UsageError("either --preset or --config is required")
    if seed is not None:
        doc["seed"] = seed
    if sample_rate is not None:
        doc["sample_rate"] = sample_rate
    if separability is not None:
        doc["class_sep"] = separability
    cfg = _config_from_toml(doc)
    ds = synth.generate(cfg, out_dir=out_dir)
    counts = {
        level: {c.value: n for c, n in class_counts(ds, level).items()}
        for level in ("subject", "session", "trial")
    }
    write_manifest(out_dir, "synth", doc, seed=cfg.seed)
    click.echo(json.dumps({"out": str(out_dir), "counts": counts}, sort_keys=True))


# ---------------------------------------------------------------------------
# load / extract / stats / export-waveforms
# ---------------------------------------------------------------------------

_common_data_opts = [
    click.option("--metadata", type=click.Path(exists=True), required=True),
    click.option("--recordings", type=click.Path(exists=True), required=True),
    click.option("--sample-rate", type=float, default=250.0,
                 help="Recording sample rate in Hz."),
]


def data_opts(fn):
    for opt in reversed(_common_data_opts):
        fn = opt(fn)
    return fn


@main.command("load")
@data_opts
@guarded
def load_cmd(metadata, recordings, sample_rate):
    """Validate a corpus and report its class cardinalities."""
    ds = _load(metadata, recordings, sample_rate)
    counts = {
        level: {c.value: n for c, n in class_counts(ds, level).items()}
        for level in ("subject", "session", "trial")
    }
    click.echo(json.dumps(
        {
            "subjects": ds.n_subjects,
            "sessions": ds.n_sessions,
            "trials": ds.n_trials,
            "counts": counts,
        },
        sort_keys=True,
    ))


@main.command("extract")
@data_opts
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--control-side", type=click.Choice(["left", "right", "first-contact"]),
              default="first-contact")
@click.option("--plate2-ap-offset", type=float, default=0.0,
              help="AP offset of plate 2's COP frame, meters.")
@click.pass_context
@guarded
def extract_cmd(ctx, metadata, recordings, sample_rate, out_dir, control_side,
                plate2_ap_offset):
    """Emit the 52-column parameter table plus an exclusions report."""
    ds = _load(metadata, recordings, sample_rate)
    bundle = feat.extract_features(
        ds, _extract_cfg(control_side, plate2_ap_offset),
        jobs=ctx.obj.get("jobs"),
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    bundle.param_table().to_csv(out / "params.csv", index=False, float_format="%.10g")
    pd.DataFrame(bundle.exclusions, columns=["trial_id", "stage", "message"]).to_csv(
        out / "exclusions.csv", index=False
    )
    write_manifest(out, "extract",
                   {"control_side": control_side, "sample_rate": sample_rate,
                    "plate2_ap_offset": plate2_ap_offset},
                   [metadata])
    click.echo(json.dumps(
        {"rows": int(bundle.params_ok.sum()), "excluded": len(bundle.exclusions)}
    ))


@main.command("stats")
@data_opts
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_context
@guarded
def stats_cmd(ctx, metadata, recordings, sample_rate, out_dir):
    """Per-class median/IQR/range of every parameter (boxplot data)."""
    ds = _load(metadata, recordings, sample_rate)
    bundle = feat.extract_features(ds, jobs=ctx.obj.get("jobs"))
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    feat.parameter_stats(bundle).to_csv(out / "stats.csv", index=False,
                                        float_format="%.10g")
    write_manifest(out, "stats", {"sample_rate": sample_rate}, [metadata])
    click.echo(json.dumps({"out": str(out / 'stats.csv')}))


@main.command("export-waveforms")
@data_opts
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--trials", type=str, default=None,
              help="Comma-separated trial ids (default: all).")
@guarded
def export_waveforms_cmd(metadata, recordings, sample_rate, out_dir, trials):
    """Write the five 1000-sample normalized signals per trial to CSV."""
    ds = _load(metadata, recordings, sample_rate)
    wanted = trials.split(",") if trials else ds.trial_ids_sorted()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    pct = 100.0 * np.arange(1000) / 999.0
    written = 0
    for tid in wanted:
        trial = ds.trials[tid].materialized()
        subject = ds.subject_of_trial(tid)
        session = ds.session_of_trial(tid)
        pre = preprocess_trial(trial, subject, session)
        for plate, wf in enumerate(pre.waveforms):
            frame = pd.DataFrame(
                {
                    "stance_pct": pct,
                    "f_v": wf.f_v,
                    "f_ap": wf.f_ap,
                    "f_ml": wf.f_ml,
                    "cop_ap": wf.cop_ap,
                    "cop_ml": wf.cop_ml,
                }
            )
            frame.to_csv(out / f"{tid}_plate{plate + 1}.csv", index=False,
                         float_format="%.8g")
            written += 1
    write_manifest(out, "export-waveforms", {"trials": wanted}, [metadata])
    click.echo(json.dumps({"files": written}))


# ---------------------------------------------------------------------------
# represent / discriminate
# ---------------------------------------------------------------------------


@main.command("represent")
@data_opts
@click.option("--type", "rep_type",
              type=click.Choice(["params", "pca-f", "pca-all5", "pca-cop",
                                 "pca-of-params"]),
              required=True)
@click.option("--variance", type=click.Choice(["0.90", "0.95", "0.98"]), default="0.98")
@click.option("--norm", type=click.Choice(["none", "zscore", "minmax"]), default="none")
@click.option("--pre-norm", type=click.Choice(["zscore", "minmax"]), default="zscore",
              help="Parameter pre-normalization for pca-of-params.")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_context
@guarded
def represent_cmd(ctx, metadata, recordings, sample_rate, rep_type, variance, norm,
                  pre_norm, out_dir):
    """Emit a feature-matrix CSV plus the fitted model as JSON."""
    ds = _load(metadata, recordings, sample_rate)
    bundle = feat.extract_features(ds, jobs=ctx.obj.get("jobs"))
    all_rows = np.ones(bundle.n_trials, dtype=bool)
    rep = exp.build_representation(
        bundle, rep_type, all_rows, pre_norm, float(variance)
    )
    if norm != "none":
        rep = reps.normalize(rep, norm, all_rows)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(
        rep.matrix, columns=[f"dim{j:03d}" for j in range(rep.matrix.shape[1])]
    )
    frame.insert(0, "trial_id", bundle.trial_ids)
    frame.to_csv(out / "features.csv", index=False, float_format="%.10g")
    models = {}
    for key, model in rep.pca_models.items():
        models[key] = {
            "mean": model.mean.tolist(),
            "components": model.components.tolist(),
            "eigenvalues": model.eigenvalues.tolist(),
            "retained_count": model.retained_count,
            "retained_variance_target": model.retained_variance_target,
        }
    (out / "model.json").write_text(json.dumps(
        {
            "name": rep.name,
            "dims": rep.matrix.shape[1],
            "block_dims": rep.block_dims,
            "normalization": rep.normalization.method,
            "models": models,
        },
        indent=2, sort_keys=True,
    ))
    write_manifest(out, "represent",
                   {"type": rep_type, "variance": variance, "norm": norm},
                   [metadata])
    click.echo(json.dumps({"name": rep.name, "dims": rep.matrix.shape[1]}))


@main.command("discriminate")
@data_opts
@click.option("--lda-eval", type=click.Choice(["cv", "resub"]), default="cv")
@click.option("--seed", type=int, default=0)
@click.option("--heatmap-data", is_flag=True, default=False)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_context
@guarded
def discriminate_cmd(ctx, metadata, recordings, sample_rate, lda_eval, seed,
                     heatmap_data, out_dir):
    """Emit the discriminativity grid (divergence from the zero rule)."""
    ds = _load(metadata, recordings, sample_rate)
    bundle = feat.extract_features(ds, jobs=ctx.obj.get("jobs"))
    grid = disc.discriminativity_grid(bundle, eval_mode=lda_eval, seed=seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    grid.values.to_csv(out / "grid.csv", index_label="partition",
                       float_format="%.6f")
    (out / "baselines.json").write_text(
        json.dumps(grid.baselines, indent=2, sort_keys=True)
    )
    if heatmap_data:
        grid.long_format().to_csv(out / "grid_long.csv", index=False,
                                  float_format="%.6f")
    write_manifest(out, "discriminate",
                   {"lda_eval": lda_eval, "sample_rate": sample_rate}, [metadata],
                   seed=seed)
    click.echo(json.dumps(
        {"rows": grid.values.shape[0], "columns": grid.values.shape[1]}
    ))


# ---------------------------------------------------------------------------
# train / evaluate / bench
# ---------------------------------------------------------------------------


def _write_report(out, report, stem="report"):
    (out / f"{stem}.json").write_text(report.to_json())
    conf = pd.DataFrame(
        report.confusion,
        index=[f"true_{c}" for c in report.class_order],
        columns=[f"pred_{c}" for c in report.class_order],
    )
    conf.to_csv(out / f"{stem}_confusion.csv")


@main.command("train")
@data_opts
@click.option("--task", type=click.Choice(["ncakh", "nvgd", "thigh-shank"]),
              required=True)
@click.option("--rep", "rep_type",
              type=click.Choice(["params", "pca-f", "pca-all5", "pca-cop",
                                 "pca-of-params"]), required=True)
@click.option("--classifier",
              type=click.Choice(["svm-linear", "svm-rbf", "knn", "mlp"]),
              required=True)
@click.option("--norm", type=click.Choice(["none", "zscore", "minmax"]),
              default="zscore")
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_context
@guarded
def train_cmd(ctx, metadata, recordings, sample_rate, task, rep_type, classifier,
              norm, seed, out_dir):
    """Train on the 65% patient-disjoint split and evaluate on the rest."""
    ds = _load(metadata, recordings, sample_rate)
    bundle = feat.extract_features(ds, jobs=ctx.obj.get("jobs"))
    report = exp.run_task(bundle, task, rep_type, classifier, seed, norm=norm)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write_report(out, report)
    write_manifest(out, "train",
                   {"task": task, "rep": rep_type, "classifier": classifier,
                    "norm": norm}, [metadata], seed=seed)
    click.echo(json.dumps({"divergence": report.divergence,
                           "accuracy": report.accuracy}))


@main.command("evaluate")
@click.option("--report", "report_path", type=click.Path(exists=True), required=True,
              help="A report.json produced by train/bench.")
@guarded
def evaluate_cmd(report_path):
    """Re-print the headline numbers of a stored evaluation report."""
    doc = json.loads(Path(report_path).read_text())
    click.echo(json.dumps(
        {
            "task": doc["task"],
            "representation": doc["representation"],
            "classifier": doc["classifier"],
            "accuracy": doc["accuracy"],
            "baseline": doc["baseline"],
            "divergence": doc["divergence"],
        },
        sort_keys=True,
    ))


@main.group("bench")
def bench_group():
    """Scripted experiment matrices."""


def _bench_common(fn):
    fn = click.option("--annotate-paper", is_flag=True, default=False)(fn)
    fn = click.option("--folds", type=int, default=5)(fn)
    fn = click.option("--out", "out_dir", type=click.Path(), required=True)(fn)
    fn = click.option("--seed", type=int, default=0)(fn)
    return data_opts(fn)


def _emit_bench(reports, out_dir, table, annotate, seed, metadata, folds):
    if annotate:
        exp.annotate_reports(reports, table)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for i, r in enumerate(reports):
        stem = f"cell{i:02d}"
        _write_report(out, r, stem=stem)
        row = {
            "cell": i,
            "representation": r.representation,
            "normalization": r.normalization,
            "task": r.provenance["task"],
            "classifier": r.provenance["classifier"],
            "balance_mode": r.provenance.get("balance_mode", "none"),
            "divergence": r.divergence,
            "accuracy": r.accuracy,
            "baseline": r.baseline,
        }
        if annotate:
            row["published_divergence"] = r.provenance.get("published_divergence")
            row["published_accuracy"] = r.provenance.get("published_accuracy")
        rows.append(row)
    pd.DataFrame(rows).to_csv(out / "combined.csv", index=False,
                              float_format="%.6f")
    write_manifest(out, f"bench-{table}", {"annotate": annotate, "folds": folds},
                   [metadata], seed=seed)
    click.echo(json.dumps({"cells": len(reports), "out": str(out)}))


@bench_group.command("table3")
@_bench_common
@guarded
def bench_table3(metadata, recordings, sample_rate, seed, out_dir, folds,
                 annotate_paper):
    """Parameterization sweep: 6 representations x 2 tasks x 2 SVM kernels."""
    ds = _load(metadata, recordings, sample_rate)
    reports = exp.run_table3(ds, seed=seed, folds=folds)
    _emit_bench(reports, out_dir, "table3", annotate_paper, seed, metadata, folds)


@bench_group.command("table4")
@_bench_common
@guarded
def bench_table4(metadata, recordings, sample_rate, seed, out_dir, folds,
                 annotate_paper):
    """Balancing study: 4 balance modes x 2 tasks, best configuration."""
    ds = _load(metadata, recordings, sample_rate)
    reports = exp.run_table4(ds, seed=seed, folds=folds)
    _emit_bench(reports, out_dir, "table4", annotate_paper, seed, metadata, folds)


if __name__ == "__main__":
    main()
