"""Loss functions, sparsity-recovery metrics, and robust table summaries."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky

from .cholesky import PrecisionEstimate


@dataclass(frozen=True)
class MetricRow:
    method: str
    kl_loss: float
    op_norm: float
    inf_norm: float
    pct_correct_zeros: float
    pct_correct_nonzeros: float


def _chol_or_raise(A, name):
    try:
        return cholesky(np.asarray(A, dtype=float), lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"{name} is not positive definite") from exc


def kl_loss(sigma_true, sigma_hat):
    """Kullback-Leibler loss tr(S^-1 Sigma) - log|S^-1 Sigma| - p of an
    estimated covariance S against the truth Sigma.

    A PrecisionEstimate supplies S^-1 directly; a dense estimate goes
    through its Cholesky factorization (no explicit inverse either way).
    """
    sigma_true = np.asarray(sigma_true, dtype=float)
    p = sigma_true.shape[0]
    L_true = _chol_or_raise(sigma_true, "sigma_true")
    logdet_true = 2.0 * float(np.sum(np.log(np.diag(L_true))))
    if isinstance(sigma_hat, PrecisionEstimate):
        T = sigma_hat.factor.to_dense()
        B = T @ L_true
        trace = float(np.sum((B * B) / sigma_hat.sigma2[:, None]))
        logdet_hat = float(np.sum(np.log(sigma_hat.sigma2)))
    else:
        sigma_hat = np.asarray(sigma_hat, dtype=float)
        L_hat = _chol_or_raise(sigma_hat, "sigma_hat")
        trace = float(np.trace(cho_solve((L_hat, True), sigma_true)))
        logdet_hat = 2.0 * float(np.sum(np.log(np.diag(L_hat))))
    return trace - (logdet_true - logdet_hat) - p


def sparsity_recovery(est, truth):
    """Band-level recovery percentages (correct zeros, correct nonzeros).

    A band counts as zero only when exactly zero (the solver produces exact
    zeros).  Sides with no reference bands report NaN as the
    not-applicable marker.
    """
    if est.p != truth.p:
        raise ValueError("factors must share the dimension")
    est_zero = np.array([not np.any(b) for b in est.bands])
    true_zero = np.array([not np.any(b) for b in truth.bands])
    n_zero = int(true_zero.sum())
    n_nonzero = int((~true_zero).sum())
    pct_zeros = (100.0 * float((est_zero & true_zero).sum()) / n_zero
                 if n_zero else float("nan"))
    pct_nonzeros = (100.0 * float((~est_zero & ~true_zero).sum()) / n_nonzero
                    if n_nonzero else float("nan"))
    return pct_zeros, pct_nonzeros


def sd_mad(samples):
    """Robust spread: interquartile range (linear-interpolation quantiles)
    divided by 1.349."""
    samples = np.asarray(samples, dtype=float)
    q25, q75 = np.percentile(samples, [25.0, 75.0])
    return float((q75 - q25) / 1.349)


def format_entry(median, spread):
    """Table cell 'median(sd_mad)' with the paper's compact spread style."""
    if np.isnan(median):
        return "NA"
    if spread == 0.0:
        return f"{median:.1f}(0)"
    s = f"{spread:.1f}"
    if s.startswith("0."):
        s = s[1:]
    return f"{median:.1f}({s})"


def summarize(runs):
    """Per-metric median and sd_mad over a list of MetricRow, NaN entries
    excluded metric by metric."""
    metrics = ["kl_loss", "op_norm", "inf_norm",
               "pct_correct_zeros", "pct_correct_nonzeros"]
    out = {}
    for m in metrics:
        vals = np.array([getattr(r, m) for r in runs], dtype=float)
        vals = vals[~np.isnan(vals)]
        if vals.size == 0:
            out[m] = {"median": float("nan"), "sd_mad": float("nan"),
                      "formatted": "NA"}
            continue
        med = float(np.median(vals))
        spread = sd_mad(vals) if vals.size > 1 else 0.0
        out[m] = {"median": med, "sd_mad": spread,
                  "formatted": format_entry(med, spread)}
    return out
