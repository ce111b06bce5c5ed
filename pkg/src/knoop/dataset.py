"""Data containers, synthetic data generation, CSV persistence and normalization."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ._linalg import cholesky_with_jitter
from ._random import make_rng
from .errors import DataFormatError, DegenerateInputError

NORM_TOL = 1e-9


def _frozen(a):
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DataMatrix:
    """An ``n x d`` real matrix with column labels.

    ``values`` is stored as a read-only float64 array.
    """

    values: np.ndarray
    column_labels: tuple = None
    normalized: bool = False

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 2:
            raise ValueError(f"DataMatrix needs a 2-d array, got shape {values.shape}")
        n, d = values.shape
        if n < 1 or d < 1:
            raise ValueError(f"DataMatrix needs n >= 1 and d >= 1, got {n}x{d}")
        if not np.all(np.isfinite(values)):
            raise ValueError("DataMatrix entries must be finite")
        labels = self.column_labels
        if labels is None:
            labels = tuple(f"x{j + 1}" for j in range(d))
        labels = tuple(str(l) for l in labels)
        if len(labels) != d:
            raise ValueError(f"expected {d} column labels, got {len(labels)}")
        if len(set(labels)) != d:
            raise ValueError("column labels must be unique")
        if self.normalized:
            norms = np.linalg.norm(values, axis=0)
            bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOL)
            if bad.size:
                raise ValueError(f"normalized flag set but column {int(bad[0])} has norm {norms[bad[0]]!r}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "column_labels", labels)

    @property
    def shape(self):
        return self.values.shape

    @property
    def n_rows(self):
        return self.values.shape[0]

    @property
    def n_cols(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class ResponseVector:
    values: np.ndarray

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 1:
            raise ValueError(f"ResponseVector needs a 1-d array, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("ResponseVector entries must be finite")
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.values.shape[0]


@dataclass(frozen=True)
class SimulationConfig:
    """Parameters of the synthetic linear model.

    ``p_real = 0`` is accepted and produces a global-null dataset.
    """

    n: int
    p: int
    p_real: int
    rho: float = 0.25
    sigma2: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"n must be >= 2, got {self.n}")
        if self.p < 1:
            raise ValueError(f"p must be >= 1, got {self.p}")
        if not 0 <= self.p_real <= self.p:
            raise ValueError(f"p_real must lie in [0, p={self.p}], got {self.p_real}")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError(f"rho must lie in [0, 1), got {self.rho}")
        if not self.sigma2 >= 0.0:
            raise ValueError(f"sigma2 must be >= 0, got {self.sigma2}")
        if self.seed < 0 or self.seed >= 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True)
class GroundTruth:
    beta: np.ndarray
    support: tuple = field(default=None)

    def __post_init__(self):
        beta = _frozen(self.beta)
        nz = tuple(int(i) for i in np.flatnonzero(beta != 0.0))
        support = nz if self.support is None else tuple(sorted(int(i) for i in self.support))
        if support != nz:
            raise ValueError("support must equal the set of nonzero beta entries")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "support", support)

    @property
    def p_real(self):
        return len(self.support)

    def to_json(self):
        return {"beta": [float(b) for b in self.beta], "support": list(self.support)}

    @classmethod
    def from_json(cls, obj):
        return cls(beta=np.asarray(obj["beta"], dtype=float), support=obj.get("support"))


@dataclass(frozen=True)
class Dataset:
    X: DataMatrix
    y: ResponseVector
    truth: Optional[GroundTruth] = None
    target_label: str = "y"

    def __post_init__(self):
        if self.X.n_rows != len(self.y):
            raise ValueError(f"X has {self.X.n_rows} rows but y has {len(self.y)} entries")
        if self.truth is not None and self.truth.beta.shape[0] != self.X.n_cols:
            raise ValueError("truth.beta length must equal the column count of X")


def ar1_covariance(p: int, rho: float) -> np.ndarray:
    """AR(1) covariance ``rho ** |i - j|``."""
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    if not 0.0 <= rho < 1.0:
        raise ValueError(f"rho must lie in [0, 1), got {rho}")
    idx = np.arange(p)
    # 0 ** 0 == 1 keeps the diagonal right when rho == 0.
    return np.power(float(rho), np.abs(idx[:, None] - idx[None, :]))


def _mvn_draw(rng, n, mean, cov):
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    d = cov.shape[0]
    if cov.shape != (d, d) or mean.shape not in ((), (d,)):
        raise ValueError("mean/cov dimensions disagree")
    z = rng.standard_normal((n, d))
    if not np.any(cov):
        return np.broadcast_to(mean, (n, d)).astype(float)
    L, _ = cholesky_with_jitter(cov)
    return mean + z @ L.T


def sample_mvn(n, mean, cov, seed, labels=None) -> DataMatrix:
    """Draw ``n`` i.i.d. rows from ``N(mean, cov)``.

    Rows are ``mean + z @ L.T`` with ``L`` the (jittered) Cholesky factor and
    ``z`` a standard normal ``n x d`` block drawn in row-major order.
    """
    rng = make_rng(seed)
    return DataMatrix(_mvn_draw(rng, n, mean, cov), labels)


def synthesize(config: SimulationConfig) -> Dataset:
    """Generate ``(X, y, beta)`` from the sparse linear model.

    A single PCG64 stream seeded with ``config.seed`` is consumed in this
    order: the ``n x p`` normal block for X, ``p_real`` uniforms for the
    nonzero coefficients, the permutation of the padded coefficient vector,
    then ``n`` normals for the noise. Coefficients are ``1 - U`` with
    ``U ~ U[0, 1)`` so they are never exactly zero.
    """
    rng = make_rng(config.seed)
    cov = ar1_covariance(config.p, config.rho)
    X = _mvn_draw(rng, config.n, np.zeros(config.p), cov)
    nonzero = 1.0 - rng.random(config.p_real)
    beta = np.concatenate([nonzero, np.zeros(config.p - config.p_real)])
    beta = rng.permutation(beta)
    eps = rng.standard_normal(config.n) * math.sqrt(config.sigma2)
    y = X @ beta + eps
    return Dataset(DataMatrix(X), ResponseVector(y), GroundTruth(beta))


def normalize_columns(m: DataMatrix) -> DataMatrix:
    norms = np.linalg.norm(m.values, axis=0)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        j = int(zero[0])
        raise DegenerateInputError(f"column {j} ({m.column_labels[j]!r}) is all zeros", column=j)
    return DataMatrix(m.values / norms, m.column_labels, normalized=True)


# --- CSV persistence -------------------------------------------------------


def truth_path_for(path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".truth.json")


def _fmt(v):
    return format(float(v), ".17g")


def save_dataset(d: Dataset, path) -> None:
    """Write ``d`` as CSV (features then target) and its ground truth as a sibling JSON.

    The truth file is ``<stem>.truth.json`` next to the CSV and is only written
    when ``d.truth`` is set.
    """
    path = Path(path)
    header = list(d.X.column_labels) + [d.target_label]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row, yv in zip(d.X.values, d.y.values):
            w.writerow([_fmt(v) for v in row] + [_fmt(yv)])
    tp = truth_path_for(path)
    if d.truth is not None:
        with open(tp, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(d.truth.to_json(), fh, indent=2)
            fh.write("\n")


def load_csv(path, target_column: str = "y", load_truth: bool = True) -> Dataset:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such dataset file: {path}")
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataFormatError(f"{path}: empty file, header row required")
    header = [h.strip() for h in rows[0]]
    if target_column not in header:
        raise DataFormatError(
            f"{path}: target column {target_column!r} not found; available columns: {', '.join(header)}"
        )
    body = [r for r in rows[1:] if r]
    if not body:
        raise DataFormatError(f"{path}: no data rows")
    data = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataFormatError(f"{path}: row {i} has {len(row)} cells, header has {len(header)}", row=i)
        for j, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                raise DataFormatError(
                    f"{path}: non-numeric cell {cell!r} at row {i}, column {header[j]!r}", row=i, column=header[j]
                ) from None
            if not math.isfinite(v):
                raise DataFormatError(f"{path}: non-finite cell at row {i}, column {header[j]!r}", row=i, column=header[j])
            data[i - 2, j] = v
    t = header.index(target_column)
    feat = [j for j in range(len(header)) if j != t]
    truth = None
    tp = truth_path_for(path)
    if load_truth and tp.is_file():
        with open(tp, encoding="utf-8") as fh:
            truth = GroundTruth.from_json(json.load(fh))
    return Dataset(DataMatrix(data[:, feat], [header[j] for j in feat]), ResponseVector(data[:, t]), truth, target_column)
