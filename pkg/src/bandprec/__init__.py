"""Sparse precision matrix estimation through block-penalized bands of the
modified Cholesky factor."""

__version__ = "0.1.0"

from .baselines import BandingConfig, fit_banded, fit_banded_cv, sample_covariance
from .cholesky import (BandedCholesky, ConvergenceError, PrecisionEstimate,
                       assemble_covariance, assemble_precision, extract_band,
                       load_dense_csv, load_estimate, norm_inf_elementwise,
                       norm_operator, save_dense_csv, save_estimate)
from .estimators import BandedCholeskyPrecision, BlockPenalizedPrecision
from .evaluation import (MetricRow, format_entry, kl_loss, sd_mad,
                         sparsity_recovery, summarize)
from .forecast import (ForecastSplit, conditional_mean, inverse_transform_counts,
                       mae_by_interval, run_callcenter, transform_counts)
from .initial import InitialConfig, initial_ols, smooth_bands, window_start
from .penalty import (BlockPartition, ScadParams, band_lambda, block_weights,
                      objective_ls, objective_penalized, scad_derivative,
                      scad_penalty)
from .simulation import (ExperimentPlan, ModelSpec, generate, run_experiment,
                         true_model, write_results)
from .solver import (SolveReport, SolverConfig, fit_block_penalized,
                     gradient_ls, kkt_check, max_stepsize, project_block_norms,
                     solve_linearized)
from .tuning import (GcvResult, default_lambda_grid, gaussian_validation_loss,
                     gcv_score, kfold_cv, select_lambda)

__all__ = [
    "BandedCholesky", "PrecisionEstimate", "ConvergenceError",
    "assemble_precision", "assemble_covariance", "extract_band",
    "norm_inf_elementwise", "norm_operator",
    "save_estimate", "load_estimate", "save_dense_csv", "load_dense_csv",
    "InitialConfig", "initial_ols", "smooth_bands", "window_start",
    "ScadParams", "BlockPartition", "band_lambda", "block_weights",
    "scad_derivative", "scad_penalty", "objective_ls", "objective_penalized",
    "SolverConfig", "SolveReport", "gradient_ls", "max_stepsize",
    "project_block_norms", "solve_linearized", "fit_block_penalized",
    "kkt_check",
    "GcvResult", "gcv_score", "select_lambda", "default_lambda_grid",
    "kfold_cv", "gaussian_validation_loss",
    "BandingConfig", "fit_banded", "fit_banded_cv", "sample_covariance",
    "MetricRow", "kl_loss", "sparsity_recovery", "sd_mad", "summarize",
    "format_entry",
    "ModelSpec", "ExperimentPlan", "true_model", "generate",
    "run_experiment", "write_results",
    "ForecastSplit", "transform_counts", "inverse_transform_counts",
    "conditional_mean", "mae_by_interval", "run_callcenter",
    "BlockPenalizedPrecision", "BandedCholeskyPrecision",
]
