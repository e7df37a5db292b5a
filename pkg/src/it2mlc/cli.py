"""Command-line entry point: ``it2mlc {train,eval,sweep,ablate,stats,gradcheck}``."""

from __future__ import annotations

import functools
import json
import logging
from pathlib import Path

import click

from . import harness
from .data import check_expected, load_dataset, resolve_spec, stats
from .errors import It2Error
from .harness import ExperimentConfig
from .model import load_bundle, save_bundle


def _parse_floats(text):
    return [float(x) for x in text.split(",") if x.strip()]


def _parse_ints(text):
    return [int(x) for x in text.split(",") if x.strip()]


def experiment_options(fn):
    @click.option("--dataset", help="Registered dataset name or path to an .arff file.")
    @click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                  help="JSON experiment config; flags override its fields.")
    @click.option("--data-dir", type=click.Path(file_okay=False), help="Directory holding dataset files.")
    @click.option("--seed", type=int, help="Run a single seed.")
    @click.option("--seeds", help="Comma-separated seeds, e.g. 0,1,2,3,4.")
    @click.option("--lambda", "lam", type=float, help="Defuzzification width penalty.")
    @click.option("--eta", type=float, help="Weight of the cardinality cross-entropy.")
    @click.option("--mode", type=click.Choice(["it2", "type1"]))
    @click.option("--out", type=click.Path(file_okay=False), default="runs", show_default=True,
                  help="Output directory.")
    @functools.wraps(fn)
    def wrapper(**kw):
        return fn(**kw)
    return wrapper


def build_config(config_path=None, dataset=None, data_dir=None, seed=None, seeds=None, lam=None,
                 eta=None, mode=None) -> ExperimentConfig:
    d = json.loads(Path(config_path).read_text()) if config_path else {}
    if dataset is not None:
        d["dataset"] = dataset
    if data_dir is not None:
        d["data_dir"] = data_dir
    if seeds is not None:
        d["seeds"] = _parse_ints(seeds)
    if seed is not None:
        d["seeds"] = [seed]
    model = dict(d.get("model", {}))
    for key, val in (("lam", lam), ("eta", eta), ("mode", mode)):
        if val is not None:
            model[key] = val
    d["model"] = model
    return ExperimentConfig.from_dict(d)


def _cfg(kw) -> ExperimentConfig:
    return build_config(kw["config_path"], kw["dataset"], kw["data_dir"], kw["seed"], kw["seeds"],
                        kw["lam"], kw["eta"], kw["mode"])


def _fail_on_errors(fn):
    @functools.wraps(fn)
    def wrapper(*a, **kw):
        try:
            return fn(*a, **kw)
        except It2Error as exc:
            raise click.ClickException(str(exc)) from exc
    return wrapper


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log per-seed progress.")
def main(verbose):
    """Interval type-2 fuzzy multi-label classification experiments."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s")


@main.command()
@experiment_options
@_fail_on_errors
def train(**kw):
    """Train one model per seed, evaluate on the test split, save bundles and reports."""
    cfg = _cfg(kw)
    out = Path(kw["out"])
    (out / "models").mkdir(parents=True, exist_ok=True)
    record, results = harness.run_pipeline(cfg, keep=True)
    for res in results:
        save_bundle(out / "models" / f"seed{res.seed}.npz", res.model,
                    {"config": cfg.to_dict(), "config_hash": cfg.config_hash(), "seed": res.seed})
    _write_record(record, out, "results")
    for f in record.failures:
        click.echo(f"seed {f['seed']} failed in {f['stage']}: {f['error']}: {f['message']}", err=True)


def _write_record(record, out, stem):
    if not record.reports:
        raise click.ClickException("every seed failed; nothing to report")
    harness.emit_report(record, out / f"{stem}.jsonl", "json-lines")
    harness.emit_report(record, out / f"{stem}.txt", "text-table")
    click.echo(harness.format_table([record]))


@main.command("eval")
@click.argument("bundles", nargs=-1, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data-dir", type=click.Path(file_okay=False))
@click.option("--lambda", "lam", type=float, help="Override the bundle's lambda.")
@click.option("--out", type=click.Path(file_okay=False), default="runs", show_default=True)
@_fail_on_errors
def eval_(bundles, data_dir, lam, out):
    """Re-evaluate saved model bundles on their configured test split."""
    record = None
    for path in bundles:
        model, meta = load_bundle(path)
        cfg = ExperimentConfig.from_dict(meta["config"])
        if data_dir is not None:
            cfg.data_dir = data_dir
        data = harness.prepare_data(cfg)
        rep = harness.evaluate_model(model, data.test, lam=lam, seed=meta["seed"], cfg=cfg)
        if record is None:
            record = harness.RunRecord(meta["config_hash"], cfg.dataset_name, model.params.mode,
                                       lam=model.params.lam if lam is None else lam)
        record.reports.append(rep)
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    _write_record(record, out, "eval")


@main.command()
@experiment_options
@click.option("--lambdas", default="0,0.05,0.1,0.2,0.3,0.5", show_default=True,
              help="Comma-separated lambda values.")
@_fail_on_errors
def sweep(lambdas, **kw):
    """Train once per seed, then re-defuzzify under each lambda and report dM."""
    cfg = _cfg(kw)
    out = Path(kw["out"])
    out.mkdir(parents=True, exist_ok=True)
    result = harness.lambda_sweep(cfg, _parse_floats(lambdas))
    rows = []
    for lam in result.lambdas:
        rec = result.records[lam]
        rows.append({"kind": "sweep", "lambda": lam, "config_hash": rec.config_hash, "mean": rec.mean(),
                     "std": rec.std(), "delta": {m: result.deltas[m][lam] for m in result.deltas}})
    (out / "sweep.jsonl").write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))
    (out / "sweep.txt").write_text(result.table() + "\n")
    click.echo(result.table())


@main.command()
@experiment_options
@_fail_on_errors
def ablate(**kw):
    """Compare the interval type-2 pipeline with its type-1 variant on shared seeds."""
    cfg = _cfg(kw)
    out = Path(kw["out"])
    out.mkdir(parents=True, exist_ok=True)
    result = harness.ablation(cfg)
    for name, rec in (("it2", result.it2), ("type1", result.type1)):
        if rec.reports:
            harness.emit_report(rec, out / f"ablation-{name}.jsonl", "json-lines")
    (out / "ablation.txt").write_text(result.table() + "\n")
    click.echo(result.table())


@main.command("stats")
@click.option("--dataset", required=True)
@click.option("--data-dir", type=click.Path(file_okay=False))
@_fail_on_errors
def stats_(dataset, data_dir):
    """Print dataset statistics and compare them with the registered expectation."""
    ds = load_dataset(dataset, data_dir)
    st = stats(ds)
    for k, v in st.to_dict().items():
        click.echo(f"{k:<24} {v:.4f}" if isinstance(v, float) else f"{k:<24} {v}")
    problems = check_expected(st, resolve_spec(dataset).expected)
    for p in problems:
        click.echo(f"MISMATCH {p}", err=True)
    if problems:
        raise SystemExit(1)


@main.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--tolerance", type=float, default=1e-4, show_default=True)
def gradcheck(seed, tolerance):
    """Finite-difference check of every analytic gradient in the package."""
    reports = harness.gradient_checks(seed, tolerance)
    ok = True
    for name, rep in reports.items():
        click.echo(f"[{'PASS' if rep.passed else 'FAIL'}] {name} (max rel err {rep.max_error:.2e})")
        for line in rep.lines():
            click.echo(f"    {line}")
        ok &= rep.passed
    if not ok:
        raise SystemExit(1)


if __name__ == "__main__":
    main()
