"""Windowed-OLS initial Cholesky estimate and local-polynomial band smoothing.

Row i of the factor is estimated by regressing variable i on the window of
predecessors starting at max(floor(i - gamma*n), 1), which keeps every
regression well-posed even when p > n.  Coefficients outside the window are
zero unless the regressions are continued block-by-block over earlier
variables.  Each band can then be smoothed along its normalized row position
with a local-linear Epanechnikov fit, which sharpens the separation between
zero and nonzero bands.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .cholesky import BandedCholesky

RIDGE_JITTER = 1e-10


@dataclass(frozen=True)
class InitialConfig:
    """Settings for the initial estimator.

    ``gamma`` is the window fraction in (0, 1); ``smoothing_bandwidth`` is on
    the normalized index scale (0, 1], None disables smoothing; bands shorter
    than ``min_smooth_length`` pass through unsmoothed.
    """

    gamma: float = 0.9
    continue_beyond_window: bool = False
    smoothing_bandwidth: float | None = 0.3
    min_smooth_length: int = 5

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        h = self.smoothing_bandwidth
        if h is not None and not 0.0 < h <= 1.0:
            raise ValueError(f"smoothing bandwidth must lie in (0, 1], got {h}")
        if self.min_smooth_length < 1:
            raise ValueError("min_smooth_length must be positive")


def window_start(i, gamma, n):
    """First regressor index c for row i (both 1-based)."""
    return max(math.floor(i - gamma * n), 1)


def _solve_gram(A, b):
    """Solve the normal equations, adding a deterministic ridge jitter when
    the window Gram matrix is numerically singular."""
    try:
        coef = np.linalg.solve(A, b)
        if np.all(np.isfinite(coef)):
            return coef
    except np.linalg.LinAlgError:
        pass
    dim = A.shape[0]
    jitter = RIDGE_JITTER * (np.trace(A) / dim if np.trace(A) > 0 else 1.0)
    warnings.warn("singular window Gram matrix; applying ridge jitter",
                  RuntimeWarning, stacklevel=3)
    return np.linalg.solve(A + jitter * np.eye(dim), b)


def _solve_gram_full(A, rhs):
    """Coefficients plus the diagonal of the Gram inverse (for the
    first-step coefficient variances), with the same jitter fallback."""
    dim = A.shape[0]
    eye = np.eye(dim)
    stacked = np.concatenate([rhs[:, None], eye], axis=1)
    try:
        sol = np.linalg.solve(A, stacked)
        if np.all(np.isfinite(sol)):
            return sol[:, 0], np.diag(sol[:, 1:]).copy()
    except np.linalg.LinAlgError:
        pass
    jitter = RIDGE_JITTER * (np.trace(A) / dim if np.trace(A) > 0 else 1.0)
    warnings.warn("singular window Gram matrix; applying ridge jitter",
                  RuntimeWarning, stacklevel=3)
    sol = np.linalg.solve(A + jitter * eye, stacked)
    return sol[:, 0], np.diag(sol[:, 1:]).copy()


def initial_ols(Y, cfg=InitialConfig(), return_variances=False):
    """Windowed-OLS Cholesky factor of the data matrix.

    For each i = 2..p, variable i is regressed on the window
    (y_c, ..., y_{i-1}) with c = max(floor(i - gamma*n), 1).  With
    ``continue_beyond_window`` the regression continues over successive
    batches of floor(gamma*n) earlier variables until every coefficient is
    filled; otherwise the remaining coefficients are zero.

    With ``return_variances`` the band-major first-step coefficient
    variances (residual mean square times the Gram-inverse diagonal) are
    returned alongside, for precision-weighted band smoothing.
    """
    Y = np.asarray(Y, dtype=float)
    n, p = Y.shape
    if n < 2 or p < 2:
        raise ValueError(f"need n >= 2 and p >= 2, got n={n}, p={p}")
    G = Y.T @ Y
    batch = max(int(math.floor(cfg.gamma * n)), 1)
    bands = [np.zeros(p - j) for j in range(1, p)]
    variances = [np.full(p - j, np.inf) for j in range(1, p)]

    def fill(i, cols, coef, var):
        # column k (1-based) of row i lives in band i - k at offset k - 1
        for k, c, v in zip(cols, coef, var):
            bands[i - k - 1][k - 1] = c
            variances[i - k - 1][k - 1] = v

    def regress(i, cols):
        idx = np.array(cols) - 1
        coef, inv_diag = _solve_gram_full(G[np.ix_(idx, idx)], G[idx, i - 1])
        rss = max(float(G[i - 1, i - 1] - coef @ G[idx, i - 1]), 0.0)
        dof = max(n - len(cols), 1)
        fill(i, cols, coef, np.maximum(rss / dof * inv_diag, 0.0))

    for i in range(2, p + 1):
        c = window_start(i, cfg.gamma, n)
        regress(i, list(range(c, i)))
        if cfg.continue_beyond_window:
            hi = c - 1
            while hi >= 1:
                lo = max(hi - batch + 1, 1)
                regress(i, list(range(lo, hi + 1)))
                hi = lo - 1

    factor = BandedCholesky(p=p, bands=tuple(bands))
    if return_variances:
        return factor, tuple(variances)
    return factor


def _local_linear(x, y, h, prec=None):
    """Local-linear fit of y on x evaluated at every x, Epanechnikov kernel.

    With ``prec`` the kernel weights are multiplied by the per-point
    precisions (inverse first-step variances), so noisy coefficients from
    near-singular windows carry little weight.  Polynomials of degree <= 1
    are reproduced exactly under any weights.  Degenerate local designs
    fall back to the local-constant (kernel mean) fit; an empty window
    keeps the raw value.
    """
    u = (x[None, :] - x[:, None]) / h          # row = target, col = sample
    K = 0.75 * np.maximum(1.0 - u * u, 0.0)
    if prec is not None:
        K = K * prec[None, :]
    d = u * h                                   # raw offsets sample - target
    s0 = K.sum(axis=1)
    s1 = (K * d).sum(axis=1)
    s2 = (K * d * d).sum(axis=1)
    t0 = K @ y
    t1 = (K * d) @ y
    den = s0 * s2 - s1 * s1
    scale = np.maximum(s0 * s2, 1.0)
    out = y.copy()
    ok = den > 1e-12 * scale
    out[ok] = (s2[ok] * t0[ok] - s1[ok] * t1[ok]) / den[ok]
    flat = ~ok & (s0 > 0)
    out[flat] = t0[flat] / s0[flat]
    return out


def _precisions(var):
    """Normalized inverse variances; a degenerate spread collapses to
    uniform weights."""
    v = np.maximum(var, 0.0)
    finite = np.isfinite(v)
    if not np.any(finite):
        return np.ones_like(v)
    floor = max(np.median(v[finite]), np.max(v[finite]) * 1e-8, 1e-300)
    prec = 1.0 / np.maximum(v, floor * 1e-4)
    prec[~finite] = 0.0
    if not np.any(prec > 0):
        return np.ones_like(v)
    return prec / np.max(prec)


def smooth_bands(T, cfg, variances=None):
    """Smooth every band of length >= ``min_smooth_length`` along its
    normalized row position (j + r) / p; shorter bands pass through.

    ``variances`` (band-major, as from ``initial_ols``) turn the fit into a
    precision-weighted local regression.
    """
    if cfg.smoothing_bandwidth is None:
        raise ValueError("smoothing_bandwidth is not set")
    p = T.p
    h = cfg.smoothing_bandwidth
    bands = []
    for j, b in enumerate(T.bands, start=1):
        if b.shape[0] < cfg.min_smooth_length:
            bands.append(b.copy())
            continue
        x = (j + np.arange(1, p - j + 1)) / p
        prec = None if variances is None else _precisions(variances[j - 1])
        bands.append(_local_linear(x, b, h, prec))
    return BandedCholesky(p=p, bands=tuple(bands))
