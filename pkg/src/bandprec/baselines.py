"""Comparison estimators: k-banded Cholesky regressions and the sample
covariance matrix.

Banding regresses each variable on its k immediate predecessors only, so it
is well defined for p > n but cannot zero an interior band while keeping a
later one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cholesky import BandedCholesky, PrecisionEstimate
from .initial import _solve_gram
from .solver import estimate_variances
from .tuning import gaussian_validation_loss, kfold_cv


@dataclass(frozen=True)
class BandingConfig:
    k_grid: tuple = field(default=tuple(range(11)))
    folds: int = 5
    seed: int = 0


def fit_banded(Y, k):
    """k-banded Cholesky estimate: each variable regressed on its
    min(k, i-1) immediate predecessors, bands beyond k zero."""
    Y = np.asarray(Y, dtype=float)
    n, p = Y.shape
    if k < 0:
        raise ValueError(f"banding order must be >= 0, got {k}")
    if k >= n:
        raise ValueError(f"banding order {k} must be < n={n}")
    G = Y.T @ Y
    bands = [np.zeros(p - j) for j in range(1, p)]
    if k > 0:
        for i in range(2, p + 1):
            m = min(k, i - 1)
            idx = np.arange(i - 1 - m, i - 1)      # 0-based predecessor cols
            coef = _solve_gram(G[np.ix_(idx, idx)], G[idx, i - 1])
            for k_col, c in zip(idx + 1, coef):    # back to 1-based column
                bands[i - k_col - 1][k_col - 1] = c
    factor = BandedCholesky(p=p, bands=tuple(bands))
    return PrecisionEstimate(factor=factor, sigma2=estimate_variances(Y, factor))


def fit_banded_cv(Y, cfg=BandingConfig()):
    """Banding order chosen by K-fold CV under the Gaussian validation
    loss; the returned estimate is refit on the full data."""
    Y = np.asarray(Y, dtype=float)
    n, p = Y.shape
    k_grid = [k for k in cfg.k_grid if k < n and k < p]
    if not k_grid:
        raise ValueError("no admissible banding orders in the grid")
    best_k = kfold_cv(Y, k_grid, fit_banded, gaussian_validation_loss,
                      K=cfg.folds, seed=cfg.seed)
    return fit_banded(Y, best_k), best_k


def sample_covariance(Y):
    """S = n^-1 sum (y_i - ybar)(y_i - ybar)', mirrored for exact symmetry."""
    Y = np.asarray(Y, dtype=float)
    Yc = Y - Y.mean(axis=0, keepdims=True)
    S = (Yc.T @ Yc) / Y.shape[0]
    return np.tril(S) + np.tril(S, -1).T
