"""Ridgeless (minimum-norm) least squares and the ridge baseline.

Both solvers work from the thin SVD ``X = U diag(sv) V^T``. Its cost is
``O(min(n, d)^2 * max(n, d))``, so wide designs are handled in ``O(n^2 d)``.
No intercept is fitted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import DataMatrix, ResponseVector


@dataclass(frozen=True)
class SolverConfig:
    """``lam = 0`` selects the exact minimum-norm solution."""

    lam: float = 0.0
    singular_value_cutoff: float = 1e-12

    def __post_init__(self):
        if not self.lam >= 0.0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if not 0.0 <= self.singular_value_cutoff < 1.0:
            raise ValueError("singular_value_cutoff must lie in [0, 1)")


@dataclass(frozen=True)
class RidgelessFit:
    coefficients: np.ndarray
    residual_norm: float
    effective_rank: int
    lambda_used: float


def _arrays(design, y):
    X = design.values if isinstance(design, DataMatrix) else np.asarray(design, dtype=float)
    yv = y.values if isinstance(y, ResponseVector) else np.asarray(y, dtype=float)
    if X.ndim != 2 or yv.ndim != 1:
        raise ValueError("design must be 2-d and y 1-d")
    if X.shape[0] != yv.shape[0]:
        raise ValueError(f"design has {X.shape[0]} rows but y has {yv.shape[0]} entries")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(yv))):
        raise ValueError("design and y must be finite")
    return X, yv


def _svd_solve(X, y, penalty, cutoff):
    U, sv, Vt = np.linalg.svd(X, full_matrices=False)
    keep = sv > cutoff * sv[0] if sv.size and sv[0] > 0 else np.zeros_like(sv, dtype=bool)
    uty = U[:, keep].T @ y
    s = sv[keep]
    if penalty == 0.0:
        w = uty / s
    else:
        w = uty * s / (s * s + penalty)
    return Vt[keep].T @ w, int(keep.sum())


def ridgeless_fit(design, y, cfg: SolverConfig = SolverConfig()) -> RidgelessFit:
    """Minimum-norm least squares (``cfg.lam == 0``) or ``(X'X + lam I) b = X'y``.

    Singular values below ``cutoff * sv_max`` are dropped in both cases.
    """
    X, yv = _arrays(design, y)
    beta, rank = _svd_solve(X, yv, cfg.lam, cfg.singular_value_cutoff)
    resid = float(np.linalg.norm(yv - X @ beta))
    return RidgelessFit(beta, resid, rank, float(cfg.lam))


def ridge_fit(design, y, lam: float) -> np.ndarray:
    """Minimizer of ``0.5 * ||y - X b||^2 + lam * ||b||^2``.

    The normal equations are ``(X'X + 2 lam I) b = X'y``; pass ``lam / 2`` to
    reproduce the usual ``||y - X b||^2 + lam ||b||^2`` convention.
    """
    if not lam > 0.0:
        raise ValueError(f"ridge lambda must be > 0, got {lam}")
    X, yv = _arrays(design, y)
    beta, _ = _svd_solve(X, yv, 2.0 * lam, 0.0)
    return beta


def predict(design, beta) -> ResponseVector:
    X = design.values if isinstance(design, DataMatrix) else np.asarray(design, dtype=float)
    b = np.asarray(beta, dtype=float)
    if b.ndim != 1 or X.shape[1] != b.shape[0]:
        raise ValueError(f"design has {X.shape[1]} columns but beta has shape {b.shape}")
    return ResponseVector(X @ b)
