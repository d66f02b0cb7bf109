"""Scikit-learn style estimators wrapping the precision-matrix pipelines.

Both estimators follow the ``sklearn.covariance`` conventions: ``fit(X)``
consumes an (n_samples, n_features) matrix, exposes ``location_``,
``covariance_`` and ``precision_``, and ``score`` returns the mean Gaussian
log-likelihood of held-out data.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .baselines import BandingConfig, fit_banded, fit_banded_cv
from .cholesky import assemble_covariance, assemble_precision
from .initial import InitialConfig, initial_ols, smooth_bands
from .penalty import BlockPartition, ScadParams
from .solver import SolverConfig, fit_block_penalized
from .tuning import default_lambda_grid, select_lambda


def _validate_data_matrix(X):
    X = check_array(X, dtype=np.float64, ensure_min_samples=2,
                    ensure_min_features=2)
    return X


def _gaussian_log_likelihood(X, location, precision, logdet_precision):
    Xc = X - location
    quad = np.einsum("ij,jk,ik->i", Xc, precision, Xc)
    p = X.shape[1]
    return float(np.mean(-0.5 * (p * np.log(2.0 * np.pi)
                                 - logdet_precision + quad)))


class BlockPenalizedPrecision(BaseEstimator):
    """Sparse precision matrix via band-block penalized Cholesky regression.

    The pipeline is: windowed-OLS initial factor, local-linear band
    smoothing, GCV selection of the penalty level (unless ``lam`` is given),
    then the gradient-projection solve of the linearized block-penalized
    least squares.

    Parameters
    ----------
    lam : float or None
        Penalty level; None selects it by GCV on ``lambda_grid``.
    a : float
        SCAD shape parameter (> 2).
    conventional_scad : bool
        Divide the middle SCAD branch by a - 1 (the Fan-Li form).
    gamma : float
        Window fraction for the initial regressions, in (0, 1).
    continue_beyond_window : bool
        Continue the initial regressions block-by-block over earlier
        variables instead of zeroing coefficients outside the window.
    smoothing_bandwidth : float or None
        Local-linear bandwidth on the normalized index scale; None skips
        smoothing.
    min_smooth_length : int
        Bands shorter than this pass through unsmoothed.
    precision_weighted_smoothing : bool
        Weight the local fit by the inverse first-step coefficient
        variances, taming the noise of near-singular regression windows
        when p is close to or above n.
    s_n : int or None
        Number of penalty blocks after stacking the far bands; None uses
        p - ceil(2 sqrt(p)).
    M : float
        Constraint radius of the solver; 0 is the oracle choice.
    step : float or None
        Gradient stepsize; None auto-computes a safe value.
    max_outer, max_inner : int
        Linearization steps (1 = one-step estimator) and inner iteration cap.
    tol : float
        Convergence tolerance on the max coefficient change.
    lambda_grid : array-like or None
        Grid for GCV; None builds a default 20-point log grid.
    assume_centered : bool
        Skip centering by the column means.

    Attributes
    ----------
    location_ : ndarray of shape (p,)
    factor_ : BandedCholesky
    sigma2_ : ndarray of shape (p,)
    precision_ : ndarray of shape (p, p)
    covariance_ : ndarray of shape (p, p)
    lambda_ : float
    gcv_result_ : GcvResult or None
    report_ : SolveReport
    partition_ : BlockPartition
    initial_factor_ : BandedCholesky (smoothed linearization point)
    """

    def __init__(self, lam=None, a=3.7, conventional_scad=False, gamma=0.9,
                 continue_beyond_window=False, smoothing_bandwidth=0.3,
                 min_smooth_length=5, precision_weighted_smoothing=True,
                 s_n=None, M=0.0, step=None, max_outer=1,
                 max_inner=5000, tol=1e-6, lambda_grid=None,
                 assume_centered=False):
        self.lam = lam
        self.a = a
        self.conventional_scad = conventional_scad
        self.gamma = gamma
        self.continue_beyond_window = continue_beyond_window
        self.smoothing_bandwidth = smoothing_bandwidth
        self.min_smooth_length = min_smooth_length
        self.precision_weighted_smoothing = precision_weighted_smoothing
        self.s_n = s_n
        self.M = M
        self.step = step
        self.max_outer = max_outer
        self.max_inner = max_inner
        self.tol = tol
        self.lambda_grid = lambda_grid
        self.assume_centered = assume_centered

    def fit(self, X, y=None):
        X = _validate_data_matrix(X)
        n, p = X.shape
        if self.assume_centered:
            self.location_ = np.zeros(p)
        else:
            self.location_ = X.mean(axis=0)
        Xc = X - self.location_

        init_cfg = InitialConfig(
            gamma=self.gamma,
            continue_beyond_window=self.continue_beyond_window,
            smoothing_bandwidth=self.smoothing_bandwidth,
            min_smooth_length=self.min_smooth_length,
        )
        if self.smoothing_bandwidth is not None:
            if self.precision_weighted_smoothing:
                raw, variances = initial_ols(Xc, init_cfg,
                                             return_variances=True)
            else:
                raw, variances = initial_ols(Xc, init_cfg), None
            smoothed = smooth_bands(raw, init_cfg, variances)
        else:
            smoothed = initial_ols(Xc, init_cfg)
        part = (BlockPartition.default(p) if self.s_n is None
                else BlockPartition(p=p, s_n=self.s_n))

        if self.lam is None:
            grid = (self.lambda_grid if self.lambda_grid is not None
                    else default_lambda_grid(smoothed, part, a=self.a))
            gcv = select_lambda(Xc, smoothed, grid, part, a=self.a,
                                conventional=self.conventional_scad)
            lam = gcv.best_lambda
            self.gcv_result_ = gcv
        else:
            lam = self.lam
            self.gcv_result_ = None
        params = ScadParams(lam=lam, a=self.a,
                            conventional=self.conventional_scad)
        cfg = SolverConfig(M=self.M, step=self.step, max_outer=self.max_outer,
                           max_inner=self.max_inner, tol=self.tol)
        est, report = fit_block_penalized(Xc, smoothed, params, part, cfg)

        self.lambda_ = lam
        self.partition_ = part
        self.initial_factor_ = smoothed
        self.factor_ = est.factor
        self.sigma2_ = est.sigma2
        self.estimate_ = est
        self.report_ = report
        self.precision_ = assemble_precision(est)
        self.covariance_ = assemble_covariance(est)
        self.n_features_in_ = p
        return self

    def get_precision(self):
        check_is_fitted(self, "precision_")
        return self.precision_

    def score(self, X_test, y=None):
        check_is_fitted(self, "precision_")
        X_test = check_array(X_test, dtype=np.float64)
        logdet = -float(np.sum(np.log(self.sigma2_)))
        return _gaussian_log_likelihood(X_test, self.location_,
                                        self.precision_, logdet)


class BandedCholeskyPrecision(BaseEstimator):
    """k-banded Cholesky precision estimator with CV-selected order.

    Parameters
    ----------
    k : int or None
        Banding order; None selects it by K-fold CV over ``k_grid``.
    k_grid : iterable of int or None
        Candidate orders; None uses 0..10 (clipped to the data).
    cv : int
        Number of folds.
    cv_seed : int
        Seed of the fold shuffle.
    assume_centered : bool
        Skip centering by the column means.
    """

    def __init__(self, k=None, k_grid=None, cv=5, cv_seed=0,
                 assume_centered=False):
        self.k = k
        self.k_grid = k_grid
        self.cv = cv
        self.cv_seed = cv_seed
        self.assume_centered = assume_centered

    def fit(self, X, y=None):
        X = _validate_data_matrix(X)
        n, p = X.shape
        if self.assume_centered:
            self.location_ = np.zeros(p)
        else:
            self.location_ = X.mean(axis=0)
        Xc = X - self.location_

        if self.k is None:
            grid = (tuple(self.k_grid) if self.k_grid is not None
                    else tuple(range(min(11, p, n))))
            cfg = BandingConfig(k_grid=grid, folds=self.cv, seed=self.cv_seed)
            est, k = fit_banded_cv(Xc, cfg)
        else:
            est, k = fit_banded(Xc, self.k), self.k

        self.k_ = int(k)
        self.factor_ = est.factor
        self.sigma2_ = est.sigma2
        self.estimate_ = est
        self.precision_ = assemble_precision(est)
        self.covariance_ = assemble_covariance(est)
        self.n_features_in_ = p
        return self

    def get_precision(self):
        check_is_fitted(self, "precision_")
        return self.precision_

    def score(self, X_test, y=None):
        check_is_fitted(self, "precision_")
        X_test = check_array(X_test, dtype=np.float64)
        logdet = -float(np.sum(np.log(self.sigma2_)))
        return _gaussian_log_likelihood(X_test, self.location_,
                                        self.precision_, logdet)
