"""Acceptance gate. Each test carries a ``criterion`` marker; the summary
printed at the end of the run lists one PASS/FAIL line per criterion."""

import hashlib
import json
import time
from pathlib import Path

import mpmath
import numpy as np
import pytest
from click.testing import CliRunner
from scipy import stats

from knoop._random import derive_seed, make_rng
from knoop.cli import cli
from knoop.dataset import SimulationConfig, ar1_covariance, sample_mvn, synthesize
from knoop.evaluation import auc_from_scores
from knoop.inference import PipelineConfig, knockoff_stats, knoop_pipeline, normal_cdf, select_bh
from knoop.knockoff import exchangeability_check, recursive_knockoff
from knoop.regression import SolverConfig, ridge_fit, ridgeless_fit

pytestmark = pytest.mark.slow


def crit(cid):
    return pytest.mark.criterion(cid)


def run_cli(args):
    res = CliRunner().invoke(cli, [str(a) for a in args])
    assert res.exit_code == 0, res.output
    return res


def digests(folder):
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(Path(folder).iterdir())}


def preset_run(tmp_path_factory, label, reps, parallelism=1):
    out = tmp_path_factory.mktemp(f"setting{label}")
    start = time.perf_counter()
    run_cli(["benchmark", "--preset", "paper-settings", "--only", label, "--reps", reps, "--parallelism", parallelism, "--out", out])
    elapsed = time.perf_counter() - start
    [setting] = json.loads((out / "benchmark.json").read_text())["settings"]
    return setting, elapsed


# -- 1, 2, 3: simulation benchmark reproduction ------------------------------


@pytest.fixture(scope="module")
def setting2(tmp_path_factory):
    return preset_run(tmp_path_factory, "2", 20)


@crit("1a")
def test_setting2_knoop_band_and_runtime(setting2, record_property):
    s, elapsed = setting2
    record_property("knoop_mean", round(s["knoop"]["mean"], 4))
    record_property("seconds", round(elapsed, 1))
    assert 0.72 <= s["knoop"]["mean"] <= 0.85
    assert elapsed <= 300


@crit("1b")
def test_setting2_ridge_below_knoop(setting2, record_property):
    s, _ = setting2
    record_property("ridge_mean", round(s["ridge"]["mean"], 4))
    record_property("knoop_mean", round(s["knoop"]["mean"], 4))
    assert s["ridge"]["mean"] < s["knoop"]["mean"]


@crit("2")
def test_setting1_knoop_band(tmp_path_factory, record_property):
    s, _ = preset_run(tmp_path_factory, "1", 20)
    record_property("knoop_mean", round(s["knoop"]["mean"], 4))
    assert s["repetitions"] >= 20
    assert 0.70 <= s["knoop"]["mean"] <= 0.87


@crit("3")
def test_setting12_high_dimensional(tmp_path_factory, record_property):
    s, elapsed = preset_run(tmp_path_factory, "12", 10, parallelism=4)
    record_property("knoop_mean", round(s["knoop"]["mean"], 4))
    record_property("seconds", round(elapsed, 1))
    assert (s["n"], s["p"], s["p_real"], s["rho"], s["sigma2"]) == (100, 1000, 30, 0.1, 0.25)
    assert 0.64 <= s["knoop"]["mean"] <= 0.72
    assert elapsed <= 1800


# -- 4, 5: ridgeless solver ---------------------------------------------------


@crit("4")
def test_interpolation_and_dual_oracle(record_property):
    rng = make_rng(404)
    worst_res, worst_dual = 0.0, 0.0
    for _ in range(50):
        n = int(rng.integers(2, 51))
        d = int(rng.integers(2 * n, 4 * n + 1))
        X = rng.standard_normal((n, d))
        y = rng.standard_normal(n)
        fit = ridgeless_fit(X, y)
        dual = X.T @ np.linalg.solve(X @ X.T, y)
        worst_res = max(worst_res, fit.residual_norm / np.linalg.norm(y))
        worst_dual = max(worst_dual, np.linalg.norm(fit.coefficients - dual) / np.linalg.norm(dual))
    record_property("max_rel_residual", f"{worst_res:.1e}")
    record_property("max_rel_dual_gap", f"{worst_dual:.1e}")
    assert worst_res <= 1e-8
    assert worst_dual <= 1e-8


@crit("5")
def test_ridge_limit(record_property):
    rng = make_rng(505)
    worst = 0.0
    for i in range(20):
        n = int(rng.integers(5, 60))
        d = int(rng.integers(2, 120))
        X = rng.standard_normal((n, d))
        y = rng.standard_normal(n)
        b0 = ridgeless_fit(X, y, SolverConfig()).coefficients
        b_lam = ridge_fit(X, y, 1e-10)
        worst = max(worst, np.linalg.norm(b_lam - b0) / np.linalg.norm(b0))
    record_property("max_rel_gap", f"{worst:.1e}")
    assert worst <= 1e-6


# -- 6: knockoff moments ------------------------------------------------------


@crit("6")
def test_exchangeability_moments(record_property):
    sigma = ar1_covariance(5, 0.25)
    ens = recursive_knockoff(sample_mvn(50000, np.zeros(5), sigma, seed=6), 2, seed=6)
    diag = exchangeability_check(ens, sigma)
    sets = diag.per_set_results
    worst = max(max(r["dev_cov"], r["dev_cross_offdiag"], r["dev_cross_diag"]) for r in sets)
    record_property("max_dev", round(worst, 4))
    assert len(sets) == 3
    assert worst < 0.05


# -- 7: null calibration with the default reference ---------------------------


def null_report(rep, seed_base):
    data = synthesize(SimulationConfig(n=100, p=50, p_real=0, seed=derive_seed(seed_base, rep, 0)))
    report, _, _ = knoop_pipeline(data, PipelineConfig(ell_max=3, seed=derive_seed(seed_base, rep, 1)))
    return report


@crit("7a")
def test_null_p_values_uniform(record_property):
    pooled = np.concatenate([null_report(r, 7001).p_value for r in range(50)])
    ks = stats.kstest(pooled, "uniform").statistic
    record_property("ks", round(ks, 4))
    assert pooled.size >= 2500
    assert ks < 0.05


@crit("7b")
def test_null_bh_fdr(record_property):
    fdp = []
    for r in range(100):
        sel = select_bh(null_report(r, 7002), 0.2).selected
        fdp.append(1.0 if len(sel) else 0.0)  # every selection is false under the null
    fdr = float(np.mean(fdp))
    record_property("fdr", round(fdr, 3))
    assert fdr <= 0.3


# -- 8, 9: metric and numerical kernels ---------------------------------------


def pairwise_auc(scores, support):
    pos = [scores[i] for i in support]
    neg = [scores[j] for j in range(len(scores)) if j not in support]
    wins = sum(1.0 if a > b else 0.5 if a == b else 0.0 for a in pos for b in neg)
    return wins / (len(pos) * len(neg))


@crit("8")
def test_auc_matches_pairwise_oracle():
    rng = make_rng(808)
    for i in range(200):
        p = int(rng.integers(2, 60))
        scores = rng.integers(0, 8, size=p) / 2.0 if i % 2 else rng.standard_normal(p)
        support = set(rng.choice(p, size=int(rng.integers(1, p)), replace=False).tolist())
        assert auc_from_scores(scores, support) == pairwise_auc(scores, support)


@crit("9")
def test_normal_cdf_against_high_precision(record_property):
    grid = np.linspace(-8.0, 8.0, 100_000)
    mpmath.mp.dps = 30
    oracle = np.array([float(mpmath.ncdf(x)) for x in grid])
    err = float(np.max(np.abs(normal_cdf(grid) - oracle)))
    record_property("max_abs_err", f"{err:.1e}")
    assert err <= 1e-9


@crit("9")
def test_knockoff_stats_fixture():
    coef = np.concatenate([[0.0], np.arange(1.0, 8.0)])
    mean, sd = knockoff_stats(coef, 1, 7)
    assert mean[0] == 4.0
    assert sd[0] ** 2 == pytest.approx(28 / 6, rel=1e-15)


# -- 10: determinism ----------------------------------------------------------


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    run_cli(["simulate", "--n", 100, "--p", 40, "--p-real", 6, "--seed", 3, "--out", out])
    return out


@crit("10")
@pytest.mark.parametrize(
    "args",
    [
        ["simulate", "--n", 100, "--p", 80, "--p-real", 10, "--rho", 0.25, "--sigma2", 1, "--seed", 1],
        ["select", "--in", "{csv}", "--ell-max", 3, "--top-k", 4, "--seed", 7],
        ["select", "--in", "{csv}", "--bh-alpha", 0.1],
        ["select", "--in", "{csv}", "--cv", "--folds", 5],
        ["benchmark", "--preset", "paper-settings", "--only", 2, "--reps", 2, "--seed", 42],
        ["diagnose", "--n", 2000, "--p", 5, "--ell-max", 2, "--seed", 4],
        ["diagnose", "--in", "{csv}", "--ell-max", 2],
    ],
    ids=["simulate", "select-top-k", "select-bh", "select-cv", "benchmark", "diagnose-sim", "diagnose-in"],
)
def test_cli_reruns_byte_identical(args, sim_dir, tmp_path):
    args = [str(a).replace("{csv}", str(sim_dir / "dataset.csv")) for a in args]
    run_cli(args + ["--out", tmp_path / "a"])
    run_cli(args + ["--out", tmp_path / "b"])
    first, second = digests(tmp_path / "a"), digests(tmp_path / "b")
    assert first and first == second


@crit("10")
def test_benchmark_parallelism_invariant(tmp_path):
    base = ["benchmark", "--preset", "paper-settings", "--only", 1, "--only", 2, "--reps", 4, "--seed", 11]
    run_cli(base + ["--parallelism", 1, "--out", tmp_path / "serial"])
    run_cli(base + ["--parallelism", 4, "--out", tmp_path / "parallel"])
    assert digests(tmp_path / "serial") == digests(tmp_path / "parallel")
