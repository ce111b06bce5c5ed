"""Anomaly-based significance test on ridgeless coefficients, and variable selection.

Every original variable is compared with the coefficients of its own
knockoff copies: if its coefficient is an outlier among them it is deemed
relevant. Indices are 0-based throughout.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import special, stats

from ._random import make_rng
from .dataset import Dataset, normalize_columns
from .errors import StageError
from .knockoff import DEFAULT_SHRINKAGE, KnockoffEnsemble, recursive_knockoff
from .regression import RidgelessFit, SolverConfig, ridge_fit, ridgeless_fit

Z_CLAMP = 38.0
Z_SCALES = ("alg3", "definition")
REFERENCES = ("normal", "student_t")
CV_RIDGE_LAMBDA = 1e-6


@dataclass(frozen=True)
class PipelineConfig:
    """Settings for :func:`knoop_pipeline`.

    ``z_scale="alg3"`` uses ``(b - mean) / sd``; ``"definition"`` multiplies by
    ``sqrt(k_max - 1)``. ``reference`` picks the null distribution used to turn
    ``z`` into a p-value: ``"normal"`` is ``2 * Phi(-|z|)``; ``"student_t"`` is
    the exact null law when the original and its knockoff coefficients are
    i.i.d. normal (see :func:`p_values_student_t`).
    """

    ell_max: int = 3
    solver: SolverConfig = field(default_factory=SolverConfig)
    z_scale: str = "alg3"
    seed: int = 0
    shrinkage_policy: object = DEFAULT_SHRINKAGE
    reference: str = "normal"

    def __post_init__(self):
        if self.ell_max < 1:
            raise ValueError(f"ell_max must be >= 1, got {self.ell_max}")
        if self.z_scale not in Z_SCALES:
            raise ValueError(f"z_scale must be one of {Z_SCALES}")
        if self.reference not in REFERENCES:
            raise ValueError(f"reference must be one of {REFERENCES}")


@dataclass(frozen=True)
class SignificanceReport:
    beta_hat: np.ndarray
    knockoff_mean: np.ndarray
    knockoff_sd: np.ndarray
    z: np.ndarray
    p_value: np.ndarray
    k_max: int
    ell_max: int
    labels: tuple = ()
    z_scale: str = "alg3"
    reference: str = "normal"

    @property
    def p(self):
        return self.beta_hat.shape[0]

    def ranking(self):
        """Variable indices by ascending p-value; ties by larger |z|, then lower index."""
        idx = np.arange(self.p)
        return np.lexsort((idx, -np.abs(self.z), self.p_value))

    def to_json(self):
        labels = self.labels or tuple(f"x{i + 1}" for i in range(self.p))
        return [
            {
                "index": int(i),
                "label": labels[i],
                "beta_hat": float(self.beta_hat[i]),
                "knockoff_mean": float(self.knockoff_mean[i]),
                "knockoff_sd": float(self.knockoff_sd[i]),
                "z": float(self.z[i]),
                "p_value": float(self.p_value[i]),
            }
            for i in self.ranking()
        ]


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple
    method: str
    parameters: dict

    def to_json(self):
        return {"method": self.method, "params": self.parameters, "selected": [int(i) for i in self.selected]}


def knockoff_stats(fit, p: int, k_max: int):
    """Per-variable mean and sample SD of the knockoff coefficients.

    ``fit`` is a :class:`RidgelessFit` or a coefficient vector laid out as
    ``[b_1..b_p, b_{1,1}..b_{1,p}, ..., b_{kmax,1}..b_{kmax,p}]``.
    Returns ``(mean, sd)``, each of length ``p``.
    """
    coef = fit.coefficients if isinstance(fit, RidgelessFit) else np.asarray(fit, dtype=float)
    if k_max < 2:
        raise ValueError(f"knockoff variance needs k_max >= 2, got {k_max}")
    if coef.shape != ((k_max + 1) * p,):
        raise ValueError(f"expected {(k_max + 1) * p} coefficients, got {coef.shape}")
    ko = coef[p:].reshape(k_max, p)
    mean = ko.mean(axis=0)
    sd = np.sqrt(np.sum((ko - mean) ** 2, axis=0) / (k_max - 1))
    return mean, sd


def z_statistics(beta_hat, mean, sd, scale="alg3", k_max=None):
    """Standardized distance of each original coefficient from its knockoffs.

    Sign follows ``beta_hat - mean``. A zero SD gives ``z = 0`` when the
    coefficient equals the mean and ``+-38`` otherwise.
    """
    if scale not in Z_SCALES:
        raise ValueError(f"scale must be one of {Z_SCALES}")
    diff = np.asarray(beta_hat, dtype=float) - np.asarray(mean, dtype=float)
    sd = np.asarray(sd, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = diff / sd
    z = np.where(sd > 0, z, np.where(diff == 0, 0.0, np.sign(diff) * Z_CLAMP))
    if scale == "definition":
        if k_max is None:
            raise ValueError("the 'definition' scale needs k_max")
        z = z * math.sqrt(k_max - 1)
    return np.clip(z, -Z_CLAMP, Z_CLAMP)


def normal_cdf(x):
    return special.ndtr(x)


def p_values(z):
    return 2.0 * normal_cdf(-np.abs(np.asarray(z, dtype=float)))


def p_values_student_t(z, k_max, scale="alg3"):
    """Two-sided p-values from the ``t_{k_max - 1}`` reference.

    If the original coefficient and its ``k_max`` knockoff coefficients are
    i.i.d. normal, ``(b - mean) / (sd * sqrt(1 + 1/k_max))`` is exactly
    Student-t with ``k_max - 1`` degrees of freedom.
    """
    t = np.abs(np.asarray(z, dtype=float))
    if scale == "definition":
        t = t / math.sqrt(k_max - 1)
    t = t / math.sqrt(1.0 + 1.0 / k_max)
    return np.minimum(2.0 * stats.t.sf(t, df=k_max - 1), 1.0)


def significance_report(fit, p, k_max, ell_max, labels=(), scale="alg3", reference="normal"):
    coef = fit.coefficients if isinstance(fit, RidgelessFit) else np.asarray(fit, dtype=float)
    mean, sd = knockoff_stats(coef, p, k_max)
    z = z_statistics(coef[:p], mean, sd, scale, k_max)
    pv = p_values(z) if reference == "normal" else p_values_student_t(z, k_max, scale)
    return SignificanceReport(coef[:p].copy(), mean, sd, z, pv, k_max, ell_max, tuple(labels), scale, reference)


# --- selection ----------------------------------------------------------------


def select_top_k(report: SignificanceReport, k: int) -> SelectionResult:
    if not 1 <= k <= report.p:
        raise ValueError(f"k must lie in [1, {report.p}], got {k}")
    return SelectionResult(tuple(int(i) for i in report.ranking()[:k]), "top_k", {"k": int(k)})


def select_bh(report: SignificanceReport, alpha: float) -> SelectionResult:
    """Benjamini-Hochberg step-up selection at level ``alpha``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    order = report.ranking()
    p = report.p
    ps = report.p_value[order]
    thresholds = alpha * np.arange(1, p + 1) / p
    hits = np.flatnonzero(ps <= thresholds)
    m = int(hits[-1]) + 1 if hits.size else 0
    return SelectionResult(tuple(int(i) for i in order[:m]), "bh", {"alpha": float(alpha), "n_selected": m})


def default_candidate_sizes(p):
    return sorted(set(range(1, min(p, 30) + 1)) | {p})


def select_cv(
    data: Dataset,
    report: SignificanceReport,
    folds: int = 5,
    candidate_sizes: Optional[Sequence[int]] = None,
    seed: int = 0,
) -> SelectionResult:
    """Choose how many top-ranked variables to keep by K-fold cross-validation.

    For each candidate size ``m`` a ridge model (lambda 1e-6) on the top ``m``
    columns of ``data.X`` is fitted on every training split and scored by
    validation MSE. The size with the lowest mean MSE wins, ties going to the
    smaller size. Fold membership comes from a shuffle seeded with ``seed``.
    """
    X = data.X.values
    y = data.y.values
    n, p = X.shape
    if folds < 2:
        raise ValueError(f"folds must be >= 2, got {folds}")
    if n // folds < 2:
        raise ValueError(f"{n} samples give folds smaller than 2 with {folds} folds")
    sizes = default_candidate_sizes(p) if candidate_sizes is None else sorted(set(int(m) for m in candidate_sizes))
    if not sizes or sizes[0] < 1 or sizes[-1] > p:
        raise ValueError(f"candidate sizes must lie in [1, {p}]")
    parts = np.array_split(make_rng(seed).permutation(n), folds)
    order = report.ranking()
    table = []
    for m in sizes:
        cols = order[:m]
        errs = []
        for f in range(folds):
            val = parts[f]
            train = np.concatenate([parts[g] for g in range(folds) if g != f])
            beta = ridge_fit(X[np.ix_(train, cols)], y[train], CV_RIDGE_LAMBDA)
            errs.append(float(np.mean((y[val] - X[np.ix_(val, cols)] @ beta) ** 2)))
        table.append({"size": int(m), "mse": float(np.mean(errs))})
    best = min(table, key=lambda r: (r["mse"], r["size"]))
    chosen = best["size"]
    params = {"folds": int(folds), "candidate_sizes": sizes, "chosen_size": chosen, "mse_table": table, "seed": int(seed)}
    return SelectionResult(tuple(int(i) for i in order[:chosen]), "cv", params)


# --- the full pipeline --------------------------------------------------------


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:
        raise StageError(name, exc) from exc


def knoop_pipeline(data: Dataset, cfg: PipelineConfig = PipelineConfig()):
    """Knockoffs, normalization, ridgeless fit, then per-variable p-values.

    Returns ``(report, ensemble, fit)``.
    """
    X = data.X
    p = X.n_cols
    ens: KnockoffEnsemble = _stage("knockoff", recursive_knockoff, X, cfg.ell_max, cfg.seed, cfg.shrinkage_policy)
    design = _stage("normalize", normalize_columns, ens.matrix)
    fit = _stage("ridgeless", ridgeless_fit, design, data.y, cfg.solver)
    report = _stage(
        "significance",
        significance_report,
        fit,
        p,
        ens.k_max,
        cfg.ell_max,
        X.column_labels,
        cfg.z_scale,
        cfg.reference,
    )
    return report, ens, fit


def write_json(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2)
        fh.write("\n")
