"""Conditional-mean forecasting from a partitioned covariance estimate.

The workflow mirrors the call-center analysis: counts are variance-
stabilized by the square-root transform, a covariance is estimated on the
training days, and the second half of each test day is predicted by the
Gaussian conditional mean given the first half.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .baselines import fit_banded, sample_covariance
from .cholesky import assemble_covariance
from .estimators import BlockPenalizedPrecision


@dataclass(frozen=True)
class ForecastSplit:
    """First ``p1`` coordinates condition the remaining p - p1."""

    p1: int

    def __post_init__(self):
        if self.p1 < 1:
            raise ValueError(f"conditioning block size must be >= 1, got {self.p1}")

    def check(self, p):
        if not self.p1 < p:
            raise ValueError(f"p1={self.p1} must be < p={p}")
        return self.p1, p - self.p1


def transform_counts(N):
    """Variance-stabilizing transform sqrt(N + 1/4) of a count matrix."""
    N = np.asarray(N, dtype=float)
    if np.any(N < 0):
        raise ValueError("counts must be non-negative")
    return np.sqrt(N + 0.25)


def inverse_transform_counts(y):
    """Algebraic inverse y**2 - 1/4 of the count transform."""
    y = np.asarray(y, dtype=float)
    return y * y - 0.25


def conditional_mean(mu, sigma_hat, split, y1):
    """Best mean-square predictor mu_2 + Sigma_21 Sigma_11^-1 (y1 - mu_1).

    ``y1`` may be a single observed block (p1,) or a stack (m, p1).
    """
    mu = np.asarray(mu, dtype=float)
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    p = mu.shape[0]
    p1, _ = split.check(p)
    S11 = sigma_hat[:p1, :p1]
    S21 = sigma_hat[p1:, :p1]
    try:
        factor = cho_factor(S11, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError("conditioning block of the covariance estimate is "
                         "not positive definite") from exc
    y1 = np.asarray(y1, dtype=float)
    single = y1.ndim == 1
    dev = np.atleast_2d(y1) - mu[:p1]
    x = cho_solve(factor, dev.T)
    out = mu[p1:] + (S21 @ x).T
    return out[0] if single else out


def mae_by_interval(pred, actual):
    """Mean absolute forecast error per column over the test rows."""
    pred = np.asarray(pred, dtype=float)
    actual = np.asarray(actual, dtype=float)
    if pred.shape != actual.shape:
        raise ValueError("prediction and actual matrices must share a shape")
    return np.mean(np.abs(pred - actual), axis=0)


def run_callcenter(train, test, split, estimator="sample", k=19, h=0.1,
                   bp_params=None):
    """Forecast the trailing block of each test row from the leading block.

    ``estimator`` is one of ``sample``, ``banding`` (order ``k``) or ``bp``
    (GCV-tuned block-penalized fit with smoothing bandwidth ``h``).  Returns
    the per-interval errors and a summary dict.
    """
    train = np.asarray(train, dtype=float)
    test = np.asarray(test, dtype=float)
    p = train.shape[1]
    p1, p2 = split.check(p)
    mu = train.mean(axis=0)
    centered = train - mu

    if estimator == "sample":
        sigma = sample_covariance(train)
        extra = {}
    elif estimator == "banding":
        est = fit_banded(centered, k)
        sigma = assemble_covariance(est)
        extra = {"k": int(k)}
    elif estimator == "bp":
        params = dict(bp_params or {})
        params.setdefault("smoothing_bandwidth", h)
        model = BlockPenalizedPrecision(assume_centered=True, **params)
        model.fit(centered)
        sigma = model.covariance_
        extra = {"lambda": model.lambda_}
    else:
        raise ValueError(f"unknown estimator {estimator!r}; expected "
                         "'sample', 'banding' or 'bp'")

    pred = conditional_mean(mu, sigma, split, test[:, :p1])
    err = mae_by_interval(pred, test[:, p1:])
    summary = {
        "estimator": estimator,
        "mean_err": float(np.mean(err)),
        "max_err": float(np.max(err)),
        "n_train": int(train.shape[0]),
        "n_test": int(test.shape[0]),
        "p1": p1, "p2": p2,
        **extra,
    }
    return err, summary
