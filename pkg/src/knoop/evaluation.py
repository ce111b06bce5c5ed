"""Ranking/selection metrics and the simulation benchmark."""

from __future__ import annotations

import csv
import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import List, Optional

import numpy as np
from scipy.stats import rankdata

from ._random import derive_seed, label_key, make_rng
from .dataset import GroundTruth, ResponseVector, SimulationConfig, synthesize
from .errors import StageError
from .inference import PipelineConfig, SelectionResult, knoop_pipeline
from .regression import SolverConfig, ridge_fit

RIDGE_GRID = tuple(float(v) for v in np.logspace(-4, 2, 7))
RIDGE_FOLDS = 5


def auc_from_scores(scores, truth_support) -> float:
    """ROC AUC of ``scores`` (higher = more important) against a true support set.

    Mann-Whitney form: the fraction of (true, null) pairs where the true
    variable scores higher, ties counting one half.
    """
    s = np.asarray(scores, dtype=float)
    p = s.shape[0]
    pos = np.zeros(p, dtype=bool)
    pos[list(truth_support)] = True
    n_pos = int(pos.sum())
    n_neg = p - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs a support that is neither empty nor the full set")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    ranks = rankdata(s)  # average ranks give the half-credit for ties
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass(frozen=True)
class MetricSet:
    fdr: float
    power: float
    mse: Optional[float] = None


def empirical_fdr_power(selection, truth: GroundTruth) -> MetricSet:
    sel = set(selection.selected if isinstance(selection, SelectionResult) else selection)
    support = set(truth.support)
    r = len(sel)
    v = len(sel - support)
    fdr = v / r if r else 0.0
    power = len(sel & support) / len(support) if support else 0.0
    return MetricSet(fdr, power)


def mse(y, y_hat) -> float:
    a = y.values if isinstance(y, ResponseVector) else np.asarray(y, dtype=float)
    b = y_hat.values if isinstance(y_hat, ResponseVector) else np.asarray(y_hat, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def ridge_cv_baseline(X, y, seed, grid=RIDGE_GRID, folds=RIDGE_FOLDS):
    """Ridge coefficients with lambda picked by K-fold CV over ``grid``.

    Returns ``(coefficients, lambda)``. Ties in validation MSE go to the
    smaller lambda.
    """
    n = X.shape[0]
    parts = np.array_split(make_rng(seed).permutation(n), folds)
    best = None
    for lam in grid:
        errs = []
        for f in range(folds):
            val = parts[f]
            train = np.concatenate([parts[g] for g in range(folds) if g != f])
            b = ridge_fit(X[train], y[train], lam)
            errs.append(np.mean((y[val] - X[val] @ b) ** 2))
        score = float(np.mean(errs))
        if best is None or score < best[0]:
            best = (score, lam)
    lam = best[1]
    return ridge_fit(X, y, lam), lam


# --- benchmark ----------------------------------------------------------------


@dataclass(frozen=True)
class BenchmarkSetting:
    label: str
    sim: SimulationConfig
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    repetitions: int = 20
    ridge_baseline: bool = True

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.sim.p_real < 1 or self.sim.p_real >= self.sim.p:
            raise ValueError("benchmark settings need 1 <= p_real < p so AUC is defined")

    @classmethod
    def from_json(cls, obj):
        sim = SimulationConfig(
            n=int(obj["n"]),
            p=int(obj["p"]),
            p_real=int(obj["p_real"]),
            rho=float(obj.get("rho", 0.25)),
            sigma2=float(obj.get("sigma2", 1.0)),
        )
        solver = SolverConfig(lam=float(obj.get("lambda", 0.0)))
        pipe = PipelineConfig(
            ell_max=int(obj.get("ell_max", 3)),
            solver=solver,
            z_scale=obj.get("z_scale", "alg3"),
            shrinkage_policy=obj.get("shrinkage", "ledoit_wolf"),
        )
        return cls(str(obj["label"]), sim, pipe, int(obj.get("repetitions", 20)), bool(obj.get("ridge_baseline", True)))


def _low(label, p, p_real, n):
    return BenchmarkSetting(label, SimulationConfig(n=n, p=p, p_real=p_real, rho=0.25, sigma2=1.0))


def _high(label, n):
    return BenchmarkSetting(label, SimulationConfig(n=n, p=1000, p_real=30, rho=0.1, sigma2=0.25))


REFERENCE_SETTINGS = (
    _low("1", 80, 10, 100),
    _low("2", 100, 10, 100),
    _low("3", 150, 10, 100),
    _low("4", 180, 10, 100),
    _low("5", 100, 20, 100),
    _low("6", 100, 30, 100),
    _low("7", 100, 40, 100),
    _low("8", 100, 50, 100),
    _low("9", 100, 10, 85),
    _low("10", 100, 10, 120),
    _high("11", 3000),
    _high("12", 100),
    _high("13", 1000),
)

PRESETS = {"paper-settings": REFERENCE_SETTINGS}


def _summary(values):
    vals = [float(v) for v in values]
    mean = float(np.mean(vals))
    sd = float(np.std(vals, ddof=1)) if len(vals) > 1 else None
    return {"values": vals, "mean": mean, "sd": sd}


@dataclass
class BenchmarkReport:
    master_seed: int
    settings: List[dict]

    def to_json(self):
        return {"master_seed": self.master_seed, "settings": self.settings}

    def write_json(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["setting", "repetition", "method", "auc", "seconds"])
            for s in self.settings:
                secs = s["seconds"] or [None] * s["repetitions"]
                for method in ("knoop", "ridge"):
                    if s.get(method) is None:
                        continue
                    for r, auc in enumerate(s[method]["values"]):
                        w.writerow([s["label"], r, method, format(auc, ".17g"), "" if secs[r] is None else f"{secs[r]:.3f}"])

    def setting(self, label):
        for s in self.settings:
            if s["label"] == str(label):
                return s
        raise KeyError(label)


def run_repetition(setting: BenchmarkSetting, master_seed: int, rep: int) -> dict:
    """One synthesize + pipeline (+ ridge baseline) run; seeds depend only on (master, label, rep)."""
    key = label_key(setting.label)
    t0 = time.perf_counter()
    try:
        sim = replace(setting.sim, seed=derive_seed(master_seed, key, rep, 0))
        data = synthesize(sim)
        cfg = replace(setting.pipeline, seed=derive_seed(master_seed, key, rep, 1))
        report, _, _ = knoop_pipeline(data, cfg)
        out = {"knoop": auc_from_scores(np.abs(report.z), data.truth.support)}
        if setting.ridge_baseline:
            coef, lam = ridge_cv_baseline(data.X.values, data.y.values, derive_seed(master_seed, key, rep, 2))
            out["ridge"] = auc_from_scores(np.abs(coef), data.truth.support)
            out["ridge_lambda"] = lam
    except Exception as exc:
        raise StageError(f"setting {setting.label}, repetition {rep}", exc) from exc
    out["seconds"] = time.perf_counter() - t0
    return out


def _task(args):
    return run_repetition(*args)


def run_benchmark(settings, master_seed: int = 0, parallelism: int = 1, record_timing: bool = True) -> BenchmarkReport:
    """Run every setting for its repetitions and aggregate AUCs.

    Repetitions may run in worker processes; results are gathered in
    (setting, repetition) order so aggregates do not depend on
    ``parallelism``. With ``record_timing=False`` the per-repetition
    wall-clock fields are left empty, which makes the report a pure function
    of its inputs.
    """
    settings = list(settings)
    tasks = [(s, master_seed, r) for s in settings for r in range(s.repetitions)]
    if parallelism > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    out, i = [], 0
    for s in settings:
        chunk = results[i : i + s.repetitions]
        i += s.repetitions
        entry = {
            "label": s.label,
            **{k: v for k, v in asdict(s.sim).items() if k != "seed"},
            "ell_max": s.pipeline.ell_max,
            "repetitions": s.repetitions,
            "knoop": _summary([r["knoop"] for r in chunk]),
            "ridge": None,
            "seconds": [r["seconds"] for r in chunk] if record_timing else None,
        }
        if s.ridge_baseline:
            entry["ridge"] = _summary([r["ridge"] for r in chunk])
            entry["ridge"]["lambdas"] = [r["ridge_lambda"] for r in chunk]
        out.append(entry)
    return BenchmarkReport(int(master_seed), out)
