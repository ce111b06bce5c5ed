"""Knockoff-based variable selection with over-parameterized ridgeless regression."""

from .dataset import (
    DataMatrix,
    Dataset,
    GroundTruth,
    ResponseVector,
    SimulationConfig,
    ar1_covariance,
    load_csv,
    normalize_columns,
    sample_mvn,
    save_dataset,
    synthesize,
)
from .evaluation import BenchmarkSetting, auc_from_scores, empirical_fdr_power, mse, run_benchmark
from .inference import (
    PipelineConfig,
    SignificanceReport,
    knoop_pipeline,
    select_bh,
    select_cv,
    select_top_k,
)
from .knockoff import exchangeability_check, fit_gaussian, recursive_knockoff
from .regression import SolverConfig, predict, ridge_fit, ridgeless_fit

__version__ = "0.1.0"

__all__ = [
    "DataMatrix",
    "Dataset",
    "GroundTruth",
    "ResponseVector",
    "SimulationConfig",
    "ar1_covariance",
    "load_csv",
    "normalize_columns",
    "sample_mvn",
    "save_dataset",
    "synthesize",
    "BenchmarkSetting",
    "auc_from_scores",
    "empirical_fdr_power",
    "mse",
    "run_benchmark",
    "PipelineConfig",
    "SignificanceReport",
    "knoop_pipeline",
    "select_bh",
    "select_cv",
    "select_top_k",
    "exchangeability_check",
    "fit_gaussian",
    "recursive_knockoff",
    "SolverConfig",
    "predict",
    "ridge_fit",
    "ridgeless_fit",
]
