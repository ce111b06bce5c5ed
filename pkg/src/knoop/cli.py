"""Command-line front end.

Usage:
    knoop simulate --n 100 --p 80 --p-real 10 --rho 0.25 --sigma2 1 --seed 1 --out data/
    knoop select --in data/dataset.csv --target y --top-k 4 --seed 7 --out results/
    knoop benchmark --preset paper-settings --only 2 --reps 20 --seed 42 --out bench/
    knoop diagnose --n 50000 --p 5 --rho 0.25 --ell-max 2 --out diag/

Tables go to stdout; machine-readable artifacts only to files under ``--out``.
"""

from __future__ import annotations

import json
import sys
from dataclasses import replace
from pathlib import Path

import click
import numpy as np

from .dataset import SimulationConfig, ar1_covariance, load_csv, sample_mvn, save_dataset, synthesize
from .errors import KnoopError
from .evaluation import PRESETS, BenchmarkSetting, run_benchmark
from .inference import PipelineConfig, knoop_pipeline, select_bh, select_cv, select_top_k, write_json
from .knockoff import exchangeability_check, recursive_knockoff
from .regression import SolverConfig

__all__ = ["cli", "main"]


def _shrinkage(value):
    try:
        return float(value)
    except ValueError:
        return value


def _outdir(path):
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


@click.group()
def cli():
    """Knockoff variable selection with over-parameterized ridgeless regression."""


@cli.command()
@click.option("--n", "n", type=int, required=True, help="Sample count.")
@click.option("--p", "p", type=int, required=True, help="Variable count.")
@click.option("--p-real", type=int, required=True, help="Number of nonzero coefficients.")
@click.option("--rho", type=float, default=0.25, show_default=True, help="AR(1) correlation.")
@click.option("--sigma2", type=float, default=1.0, show_default=True, help="Noise variance.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", "out", type=click.Path(file_okay=False), required=True, help="Output directory.")
def simulate(n, p, p_real, rho, sigma2, seed, out):
    """Generate a synthetic dataset (CSV) and its ground truth (JSON)."""
    try:
        config = SimulationConfig(n=n, p=p, p_real=p_real, rho=rho, sigma2=sigma2, seed=seed)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    data = synthesize(config)
    path = _outdir(out) / "dataset.csv"
    save_dataset(data, path)
    click.echo(f"simulated n={n} p={p} p_real={p_real} seed={seed} -> {path}")


def _pipeline_options(f):
    for opt in reversed(
        [
            click.option("--ell-max", type=int, default=3, show_default=True, help="Knockoff layers."),
            click.option("--seed", type=int, default=0, show_default=True),
            click.option("--lambda", "lam", type=float, default=0.0, show_default=True, help="0 = minimum-norm solution."),
            click.option("--z-scale", type=click.Choice(["alg3", "definition"]), default="alg3", show_default=True),
            click.option("--reference", type=click.Choice(["normal", "student_t"]), default="normal", show_default=True),
            click.option("--shrinkage", default="ledoit_wolf", show_default=True, help="ledoit_wolf, auto, or a fixed gamma."),
        ]
    ):
        f = opt(f)
    return f


def _print_top(report, limit=10):
    rows = report.to_json()[:limit]
    click.echo(f"{'rank':>4}  {'index':>5}  {'label':<12} {'beta_hat':>12} {'z':>9} {'p_value':>11}")
    for r, row in enumerate(rows, 1):
        click.echo(
            f"{r:>4}  {row['index']:>5}  {row['label']:<12} {row['beta_hat']:>12.5g} {row['z']:>9.4f} {row['p_value']:>11.4g}"
        )


@cli.command()
@click.option("--in", "in_path", type=click.Path(dir_okay=False), required=True, help="Dataset CSV.")
@click.option("--target", default="y", show_default=True, help="Response column name.")
@_pipeline_options
@click.option("--top-k", type=int, default=None, help="Keep the k smallest p-values.")
@click.option("--bh-alpha", type=float, default=None, help="Benjamini-Hochberg at this level.")
@click.option("--cv", "use_cv", is_flag=True, help="Pick the selection size by cross-validation.")
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--cv-sizes", default=None, help="Comma-separated candidate sizes for --cv.")
@click.option("--out", "out", type=click.Path(file_okay=False), default=".", show_default=True)
def select(in_path, target, ell_max, seed, lam, z_scale, reference, shrinkage, top_k, bh_alpha, use_cv, folds, cv_sizes, out):
    """Compute p-values for every variable and select a subset."""
    chosen = [name for name, v in (("--top-k", top_k), ("--bh-alpha", bh_alpha), ("--cv", use_cv or None)) if v is not None]
    if len(chosen) != 1:
        raise click.UsageError("give exactly one of --top-k, --bh-alpha, --cv")
    try:
        cfg = PipelineConfig(ell_max, SolverConfig(lam=lam), z_scale, seed, _shrinkage(shrinkage), reference)
        data = load_csv(in_path, target)
    except FileNotFoundError as exc:
        raise click.ClickException(str(exc)) from None
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    try:
        report, _, _ = knoop_pipeline(data, cfg)
        if top_k is not None:
            selection = select_top_k(report, top_k)
        elif bh_alpha is not None:
            selection = select_bh(report, bh_alpha)
        else:
            sizes = [int(s) for s in cv_sizes.split(",")] if cv_sizes else None
            selection = select_cv(data, report, folds, sizes, seed)
    except (KnoopError, ValueError) as exc:
        raise click.ClickException(str(exc)) from None
    outdir = _outdir(out)
    write_json(report.to_json(), outdir / "report.json")
    write_json(selection.to_json(), outdir / "selection.json")
    _print_top(report)
    click.echo(f"selected ({selection.method}): {list(selection.selected)}")


def _load_settings(preset, settings_file):
    if (preset is None) == (settings_file is None):
        raise click.UsageError("give exactly one of --preset or --settings")
    if preset is not None:
        if preset not in PRESETS:
            raise click.UsageError(f"unknown preset {preset!r}; known: {', '.join(PRESETS)}")
        return list(PRESETS[preset])
    try:
        with open(settings_file, encoding="utf-8") as fh:
            raw = json.load(fh)
        return [BenchmarkSetting.from_json(obj) for obj in raw]
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise click.UsageError(f"invalid settings file {settings_file}: {exc}") from None


@cli.command()
@click.option("--preset", default=None, help="Built-in settings list (paper-settings).")
@click.option("--settings", "settings_file", type=click.Path(dir_okay=False), default=None, help="JSON settings file.")
@click.option("--only", multiple=True, help="Run only these setting labels (repeatable).")
@click.option("--reps", type=int, default=None, help="Override the repetition count.")
@click.option("--seed", type=int, default=0, show_default=True, help="Master seed.")
@click.option("--parallelism", type=int, envvar="KNOOP_PARALLELISM", default=1, show_default=True)
@click.option("--no-ridge", is_flag=True, help="Skip the ridge baseline.")
@click.option("--timing", is_flag=True, help="Record wall-clock seconds in the output files.")
@click.option("--out", "out", type=click.Path(file_okay=False), default=".", show_default=True)
def benchmark(preset, settings_file, only, reps, seed, parallelism, no_ridge, timing, out):
    """Run the simulation benchmark and report AUC per setting."""
    settings = _load_settings(preset, settings_file)
    if only:
        known = {s.label for s in settings}
        missing = [o for o in only if o not in known]
        if missing:
            raise click.UsageError(f"unknown setting label(s): {', '.join(missing)}")
        settings = [s for s in settings if s.label in set(only)]
    try:
        if reps is not None:
            settings = [replace(s, repetitions=reps) for s in settings]
        if no_ridge:
            settings = [replace(s, ridge_baseline=False) for s in settings]
        report = run_benchmark(settings, seed, max(1, parallelism), record_timing=timing)
    except (KnoopError, ValueError) as exc:
        raise click.ClickException(str(exc)) from None
    outdir = _outdir(out)
    report.write_json(outdir / "benchmark.json")
    report.write_csv(outdir / "benchmark.csv")

    def fmt(summary):
        if summary is None:
            return "-"
        sd = "n/a" if summary["sd"] is None else f"{summary['sd']:.3f}"
        return f"{summary['mean']:.3f} ± {sd}"

    click.echo(f"{'setting':>7}  {'n':>5} {'p':>5} {'p_real':>6}  {'knoop AUC':>15}  {'ridge AUC':>15}")
    for s in report.settings:
        click.echo(f"{s['label']:>7}  {s['n']:>5} {s['p']:>5} {s['p_real']:>6}  {fmt(s['knoop']):>15}  {fmt(s['ridge']):>15}")


@cli.command()
@click.option("--in", "in_path", type=click.Path(dir_okay=False), default=None, help="Dataset CSV (uses X only).")
@click.option("--target", default="y", show_default=True)
@click.option("--n", "n", type=int, default=None, help="Simulated sample count.")
@click.option("--p", "p", type=int, default=None, help="Simulated variable count.")
@click.option("--rho", type=float, default=0.25, show_default=True)
@click.option("--ell-max", type=int, default=2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--shrinkage", default="ledoit_wolf", show_default=True)
@click.option("--out", "out", type=click.Path(file_okay=False), default=".", show_default=True)
def diagnose(in_path, target, n, p, rho, ell_max, seed, shrinkage, out):
    """Second-moment exchangeability diagnostics for the knockoff ensemble."""
    if in_path is None and (n is None or p is None):
        raise click.UsageError("give --in, or both --n and --p to simulate Gaussian data")
    if in_path is not None and (n is not None or p is not None):
        raise click.UsageError("--in cannot be combined with --n/--p")
    try:
        if in_path is not None:
            X = load_csv(in_path, target, load_truth=False).X
            reference = "estimate"
        else:
            reference = ar1_covariance(p, rho)
            X = sample_mvn(n, np.zeros(p), reference, seed)
        ens = recursive_knockoff(X, ell_max, seed, _shrinkage(shrinkage))
        diag = exchangeability_check(ens, reference)
    except FileNotFoundError as exc:
        raise click.ClickException(str(exc)) from None
    except (KnoopError, ValueError) as exc:
        raise click.ClickException(str(exc)) from None
    outdir = _outdir(out)
    diag.write_json(outdir / "diagnostics.json")
    click.echo(f"{'set':>4} {'layer':>5}  {'dev_cov':>9} {'cross_off':>9} {'cross_diag':>10}")
    for r in diag.per_set_results:
        click.echo(f"{r['set']:>4} {r['layer']:>5}  {r['dev_cov']:>9.4f} {r['dev_cross_offdiag']:>9.4f} {r['dev_cross_diag']:>10.4f}")


def main(argv=None):
    cli.main(args=argv, prog_name="knoop")


if __name__ == "__main__":
    sys.exit(main())
