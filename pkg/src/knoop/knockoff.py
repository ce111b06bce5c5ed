"""Second-order Gaussian model-X knockoffs and the recursive multi-layer ensemble.

Each layer fits a Gaussian to the whole current block ``[X | earlier knockoffs]``
and samples one knockoff copy of it with the equicorrelated construction, so
layer ``l`` doubles the number of column blocks. After ``ell_max`` layers there
are ``2**ell_max - 1`` knockoff sets of ``p`` columns each.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Union

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ._linalg import cholesky_with_jitter, symmetrize
from ._random import derive_seed, make_rng
from .dataset import DataMatrix
from .errors import DegenerateInputError, StageError

SHRINKAGE_GRID = (0.0, 1e-4, 1e-3, 1e-2, 1e-1, 0.3, 0.5)
# smallest admissible eigenvalue, relative to trace/d
EIG_FLOOR = 1e-6

ShrinkagePolicy = Union[float, str]
DEFAULT_SHRINKAGE = "ledoit_wolf"


@dataclass(frozen=True)
class GaussianModel:
    mean: np.ndarray
    covariance: np.ndarray
    shrinkage_gamma: float
    s_vector: np.ndarray
    min_eigenvalue: float

    @property
    def dim(self):
        return self.mean.shape[0]


def ledoit_wolf_gamma(x):
    """Ledoit-Wolf optimal shrinkage intensity toward ``trace/d * I``.

    ``x`` is an ``n x d`` sample matrix; it is centered internally. Uses the
    Gram matrix so the cost is ``O(n^2 d)`` when ``d > n``.
    """
    xc = np.asarray(x, dtype=float)
    xc = xc - xc.mean(axis=0)
    n, d = xc.shape
    sq = xc * xc
    col_var = sq.sum(axis=0) / n
    mu = col_var.sum() / d
    gram = xc @ xc.T if d > n else xc.T @ xc
    delta_ = np.sum(gram * gram) / n**2
    beta_ = np.sum(sq.sum(axis=1) ** 2)
    beta = (beta_ / n - delta_) / (d * n)
    delta = (delta_ - 2.0 * mu * col_var.sum() + d * mu**2) / d
    beta = min(beta, delta)
    return 0.0 if beta == 0 else float(beta / delta)


def _min_eig_sample_cov(S, n):
    d = S.shape[0]
    # rank(S) <= n - 1, so the smallest eigenvalue is exactly zero when d >= n
    if d >= n:
        return 0.0
    return max(float(np.linalg.eigvalsh(S)[0]), 0.0)


def fit_gaussian(m, shrinkage_policy: ShrinkagePolicy = DEFAULT_SHRINKAGE) -> GaussianModel:
    """Fit mean and shrunk covariance, and pick the equicorrelated ``s``.

    The covariance is ``(1 - g) * S + g * (trace(S)/d) * I`` with ``S`` the
    unbiased sample covariance. ``shrinkage_policy`` selects ``g``:

    * a number in ``[0, 1]``: used as is;
    * ``"auto"``: smallest value of :data:`SHRINKAGE_GRID` whose result has
      ``lambda_min >= 1e-6 * trace/d``;
    * ``"ledoit_wolf"``: the Ledoit-Wolf intensity, raised to the ``"auto"``
      value if that is larger.

    ``s_j = min(2 * lambda_min, min_j cov_jj)`` for every ``j``.
    """
    x = m.values if isinstance(m, DataMatrix) else np.asarray(m, dtype=float)
    n, d = x.shape
    if n < 2:
        raise ValueError(f"fit_gaussian needs n >= 2 rows, got {n}")
    mean = x.mean(axis=0)
    xc = x - mean
    var = np.einsum("ij,ij->j", xc, xc) / (n - 1)
    const = np.flatnonzero(var <= 0.0)
    if const.size:
        j = int(const[0])
        raise DegenerateInputError(f"column {j} has zero variance", column=j)
    S = symmetrize(xc.T @ xc / (n - 1))
    mu = float(np.trace(S)) / d
    lam_s = _min_eig_sample_cov(S, n)

    def lam_for(g):
        return (1.0 - g) * lam_s + g * mu

    def grid_gamma():
        for g in SHRINKAGE_GRID:
            if lam_for(g) >= EIG_FLOOR * mu:
                return g
        return SHRINKAGE_GRID[-1]

    if isinstance(shrinkage_policy, str):
        if shrinkage_policy == "auto":
            gamma = grid_gamma()
        elif shrinkage_policy == "ledoit_wolf":
            gamma = max(ledoit_wolf_gamma(x), grid_gamma())
        else:
            raise ValueError(f"unknown shrinkage policy {shrinkage_policy!r}")
    else:
        gamma = float(shrinkage_policy)
        if not 0.0 <= gamma <= 1.0:
            raise ValueError(f"shrinkage gamma must lie in [0, 1], got {gamma}")

    cov = (1.0 - gamma) * S
    cov[np.diag_indices(d)] += gamma * mu
    lam = lam_for(gamma)
    s = min(2.0 * lam, float(np.min(np.diag(cov))))
    return GaussianModel(mean, cov, gamma, np.full(d, s), lam)


def conditional_params(x, model):
    """Mean and covariance of ``x_tilde | x`` under ``model``.

    Returns ``(mean_rows, cond_cov)`` with ``cond_cov = 2D - D S^-1 D``
    symmetrized, before any jitter.
    """
    D = np.diag(model.s_vector)
    cf = cho_factor(model.covariance, lower=True)
    sinv_d = cho_solve(cf, D)
    cmean = x - (x - model.mean) @ sinv_d
    ccov = symmetrize(2.0 * D - D @ sinv_d)
    return cmean, ccov


def compute_knockoff(m, model: GaussianModel, seed) -> DataMatrix:
    x = m.values if isinstance(m, DataMatrix) else np.asarray(m, dtype=float)
    if x.shape[1] != model.dim:
        raise ValueError(f"model dimension {model.dim} does not match {x.shape[1]} columns")
    cmean, ccov = conditional_params(x, model)
    L, _ = cholesky_with_jitter(ccov)
    z = make_rng(seed).standard_normal(x.shape)
    return DataMatrix(cmean + z @ L.T)


@dataclass(frozen=True)
class KnockoffEnsemble:
    """``[X | K_1 | ... | K_kmax]`` with per-set layout metadata.

    ``layer_of_set[k]`` is the generation layer of set ``k`` (1-based) and
    ``source_of_set[k]`` is the block it is a knockoff of (0 means X).
    ``layer_s[l-1]`` holds the ``s`` vector used at layer ``l``.
    """

    matrix: DataMatrix
    p: int
    ell_max: int
    layer_of_set: dict
    source_of_set: dict
    layer_s: tuple = field(default=())
    layer_gamma: tuple = field(default=())

    @property
    def k_max(self):
        return 2**self.ell_max - 1

    def original(self):
        return self.matrix.values[:, : self.p]

    def knockoff_set(self, k):
        if not 1 <= k <= self.k_max:
            raise IndexError(f"knockoff set {k} outside 1..{self.k_max}")
        return self.matrix.values[:, k * self.p : (k + 1) * self.p]


def _set_labels(p, k_max):
    return [f"x{i + 1}" for i in range(p)] + [f"ko{k}_{i + 1}" for k in range(1, k_max + 1) for i in range(p)]


def recursive_knockoff(x, ell_max: int, seed, shrinkage_policy: ShrinkagePolicy = DEFAULT_SHRINKAGE) -> KnockoffEnsemble:
    if ell_max < 1:
        raise ValueError(f"ell_max must be >= 1, got {ell_max}")
    if not isinstance(x, DataMatrix):
        x = DataMatrix(x)
    p = x.n_cols
    block = x.values
    layer_of_set, source_of_set = {}, {}
    layer_s, layer_gamma = [], []
    for layer in range(1, ell_max + 1):
        try:
            model = fit_gaussian(block, shrinkage_policy)
            ko = compute_knockoff(block, model, derive_seed(seed, layer))
        except Exception as exc:
            raise StageError(f"knockoff layer {layer}", exc) from exc
        first = 2 ** (layer - 1)
        for b in range(first):
            layer_of_set[first + b] = layer
            source_of_set[first + b] = b
        layer_s.append(model.s_vector)
        layer_gamma.append(model.shrinkage_gamma)
        block = np.hstack([block, ko.values])
    k_max = 2**ell_max - 1
    labels = list(x.column_labels) + _set_labels(p, k_max)[p:]
    return KnockoffEnsemble(
        DataMatrix(block, labels), p, ell_max, layer_of_set, source_of_set, tuple(layer_s), tuple(layer_gamma)
    )


def export_ensemble_csv(ens: KnockoffEnsemble, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_set_labels(ens.p, ens.k_max))
        for row in ens.matrix.values:
            w.writerow([format(float(v), ".17g") for v in row])


# --- exchangeability diagnostics ------------------------------------------


@dataclass(frozen=True)
class KnockoffDiagnostics:
    max_abs_dev_cov_knockoff: float
    max_abs_dev_cross: float
    max_abs_dev_between_sets: float
    per_set_results: list

    def to_json(self):
        return {
            "max_abs_dev_cov_knockoff": self.max_abs_dev_cov_knockoff,
            "max_abs_dev_cross": self.max_abs_dev_cross,
            "max_abs_dev_between_sets": self.max_abs_dev_between_sets,
            "per_set_results": self.per_set_results,
        }

    def write_json(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")


def expected_joint_covariance(sigma, layer_s):
    """Population covariance of the full ensemble given ``Cov(X) = sigma``.

    Each layer maps ``G`` to ``[[G, G - D], [G - D, G]]``.
    """
    G = np.asarray(sigma, dtype=float)
    for s in layer_s:
        D = np.diag(s)
        G = np.block([[G, G - D], [G - D, G]])
    return G


def exchangeability_check(ens: KnockoffEnsemble, reference_cov="estimate") -> KnockoffDiagnostics:
    """Compare empirical second moments of every knockoff set with their targets.

    For set ``k`` this reports ``max |Cov(K_k) - Sigma|``, the off-diagonal
    cross deviation ``max_{i != j} |Cov(X_i, K_kj) - Sigma_ij|`` and the
    diagonal cross deviation against ``Sigma_jj - s_kj``, where ``s_kj`` is the
    effective shift implied by the construction (for sets in deeper layers it
    is inherited from the block they copy). Reporting only, no thresholds.
    """
    X = ens.original()
    n, p = X.shape
    if isinstance(reference_cov, str):
        if reference_cov != "estimate":
            raise ValueError("reference_cov must be a matrix or 'estimate'")
        sigma = np.cov(X, rowvar=False).reshape(p, p)
    else:
        sigma = np.asarray(reference_cov, dtype=float)
        if sigma.shape != (p, p):
            raise ValueError(f"reference covariance must be {p}x{p}")
    G_x = expected_joint_covariance(sigma, ens.layer_s)[:p]
    Xc = X - X.mean(axis=0)
    off = ~np.eye(p, dtype=bool)
    covs, per_set = {}, []
    for k in range(1, ens.k_max + 1):
        B = ens.knockoff_set(k)
        Bc = B - B.mean(axis=0)
        ck = Bc.T @ Bc / (n - 1)
        cross = Xc.T @ Bc / (n - 1)
        covs[k] = ck
        expected_diag = np.diag(G_x[:, k * p : (k + 1) * p])
        per_set.append(
            {
                "set": k,
                "layer": ens.layer_of_set[k],
                "source": ens.source_of_set[k],
                "dev_cov": float(np.max(np.abs(ck - sigma))),
                "dev_cross_offdiag": float(np.max(np.abs(cross - sigma)[off])) if p > 1 else 0.0,
                "dev_cross_diag": float(np.max(np.abs(np.diag(cross) - expected_diag))),
                "effective_s": [float(v) for v in np.diag(sigma) - expected_diag],
            }
        )
    between = 0.0
    for k in range(1, ens.k_max + 1):
        for k2 in range(k + 1, ens.k_max + 1):
            between = max(between, float(np.max(np.abs(covs[k] - covs[k2]))))
    return KnockoffDiagnostics(
        max_abs_dev_cov_knockoff=max(r["dev_cov"] for r in per_set),
        max_abs_dev_cross=max(max(r["dev_cross_offdiag"], r["dev_cross_diag"]) for r in per_set),
        max_abs_dev_between_sets=between,
        per_set_results=per_set,
    )
