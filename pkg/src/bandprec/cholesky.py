"""Band-major storage of the modified Cholesky decomposition.

A covariance matrix factors as T @ Sigma @ T.T = D with T unit lower
triangular and D diagonal.  Row i of T encodes the regression of variable i
on its predecessors: T[i, k] = -phi[i, k] for k < i.  The off-diagonal bands
of T (entries at constant sub-diagonal offset) are the unit of work for the
penalized estimators, so factors are stored band-major: band j is the vector
(phi[j+1, 1], phi[j+2, 2], ..., phi[p, p-j]) of length p - j, holding the
raw regression coefficients (the dense T carries the minus sign).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular


class ConvergenceError(RuntimeError):
    """Iterative routine failed to converge; carries the iteration count."""

    def __init__(self, message, iterations):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


@dataclass(frozen=True)
class BandedCholesky:
    """Unit lower-triangular Cholesky factor stored by off-diagonal band.

    Parameters
    ----------
    p : int
        Matrix dimension, >= 2.
    bands : tuple of ndarray
        ``bands[j - 1]`` is the j-th off-diagonal band, length ``p - j``,
        entry r (0-based) holding the coefficient at dense position
        ``(j + r, r)``.
    """

    p: int
    bands: tuple = field(default=())

    def __post_init__(self):
        if self.p < 2:
            raise ValueError(f"dimension p must be >= 2, got {self.p}")
        bands = tuple(np.asarray(b, dtype=float) for b in self.bands)
        if len(bands) != self.p - 1:
            raise ValueError(
                f"expected {self.p - 1} bands for p={self.p}, got {len(bands)}"
            )
        for j, b in enumerate(bands, start=1):
            if b.ndim != 1 or b.shape[0] != self.p - j:
                raise ValueError(
                    f"band {j} must have length {self.p - j}, got shape {b.shape}"
                )
        object.__setattr__(self, "bands", bands)

    def band(self, j):
        """Return the j-th off-diagonal band, 1 <= j <= p - 1."""
        if not 1 <= j <= self.p - 1:
            raise IndexError(f"band index {j} out of range [1, {self.p - 1}]")
        return self.bands[j - 1]

    def to_dense(self):
        """Materialize the dense unit lower-triangular T (with -phi entries)."""
        T = np.eye(self.p)
        for j, b in enumerate(self.bands, start=1):
            rows = np.arange(j, self.p)
            T[rows, rows - j] = -b
        return T

    @classmethod
    def from_dense(cls, T):
        """Read bands back from a dense unit lower-triangular factor."""
        T = np.asarray(T, dtype=float)
        p = T.shape[0]
        bands = []
        for j in range(1, p):
            rows = np.arange(j, p)
            bands.append(-T[rows, rows - j])
        return cls(p=p, bands=tuple(bands))

    @classmethod
    def identity(cls, p):
        """Factor of a diagonal covariance: every band zero."""
        return cls(p=p, bands=tuple(np.zeros(p - j) for j in range(1, p)))

    def row_coefficients(self, i):
        """Regression coefficients (phi[i, 1], ..., phi[i, i-1]) of row i, 1-based."""
        if not 2 <= i <= self.p:
            raise IndexError(f"row index {i} out of range [2, {self.p}]")
        # column k (1-based) of row i lives in band i - k at offset k - 1
        return np.array([self.bands[i - k - 1][k - 1] for k in range(1, i)])

    def band_norms(self):
        """L2 norm of every band, index 0 holding band 1."""
        return np.array([np.linalg.norm(b) for b in self.bands])


def extract_band(T, j):
    """j-th off-diagonal band of the factor, 1 <= j <= p - 1."""
    return T.band(j)


@dataclass(frozen=True)
class PrecisionEstimate:
    """A fitted (T, D) pair; assembles to Omega = T' D^-1 T."""

    factor: BandedCholesky
    sigma2: np.ndarray

    def __post_init__(self):
        sigma2 = np.asarray(self.sigma2, dtype=float)
        if sigma2.shape != (self.factor.p,):
            raise ValueError(
                f"sigma2 must have length {self.factor.p}, got shape {sigma2.shape}"
            )
        if not np.all(np.isfinite(sigma2)) or np.any(sigma2 <= 0):
            raise ValueError("all innovation variances must be finite and > 0")
        object.__setattr__(self, "sigma2", sigma2)

    @property
    def p(self):
        return self.factor.p


def assemble_precision(est):
    """Omega = T' D^-1 T, symmetry enforced by mirroring the lower triangle."""
    T = est.factor.to_dense()
    M = T.T @ (T / est.sigma2[:, None])
    return np.tril(M) + np.tril(M, -1).T


def assemble_covariance(est):
    """Sigma = T^-1 D T^-T via triangular solves (no explicit inverse)."""
    T = est.factor.to_dense()
    B = solve_triangular(T, np.diag(np.sqrt(est.sigma2)), lower=True,
                         unit_diagonal=True)
    M = B @ B.T
    return np.tril(M) + np.tril(M, -1).T


def norm_inf_elementwise(A, B=None):
    """max_ij |a_ij - b_ij| (or max |a_ij| when B is omitted)."""
    A = np.asarray(A, dtype=float)
    if B is None:
        return float(np.max(np.abs(A)))
    return float(np.max(np.abs(A - np.asarray(B, dtype=float))))


def norm_operator(A, rtol=1e-10, max_iter=10000, fallback="eigh"):
    """Spectral norm of a symmetric matrix by power iteration on A @ A.

    For symmetric A this is max |eigenvalue|; squaring removes the sign
    ambiguity so the iteration converges on magnitude.  Clustered spectra
    can stall the iteration; by default a dense symmetric eigensolve takes
    over then, while ``fallback="raise"`` surfaces the non-convergence.
    """
    A = np.asarray(A, dtype=float)
    p = A.shape[0]
    rng = np.random.default_rng(0)
    v = rng.standard_normal(p)
    v /= np.linalg.norm(v)
    est = 0.0
    for it in range(1, max_iter + 1):
        w = A @ (A @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
        new_est = float(np.sqrt(v @ (A @ (A @ v))))
        if abs(new_est - est) <= rtol * max(new_est, 1.0):
            return new_est
        est = new_est
    if fallback == "eigh":
        return float(np.max(np.abs(np.linalg.eigvalsh(A))))
    raise ConvergenceError("power iteration for the operator norm stalled",
                           max_iter)


def to_json_dict(est):
    """JSON-ready document {p, bands, sigma2} for a PrecisionEstimate."""
    return {
        "p": est.p,
        "bands": [b.tolist() for b in est.factor.bands],
        "sigma2": est.sigma2.tolist(),
    }


def from_json_dict(doc):
    factor = BandedCholesky(p=int(doc["p"]),
                            bands=tuple(np.asarray(b, dtype=float)
                                        for b in doc["bands"]))
    return PrecisionEstimate(factor=factor, sigma2=np.asarray(doc["sigma2"]))


def save_estimate(est, path):
    with open(path, "w") as fh:
        json.dump(to_json_dict(est), fh, indent=2)


def load_estimate(path):
    with open(path) as fh:
        return from_json_dict(json.load(fh))


def save_dense_csv(A, path):
    """Write a dense matrix as CSV, one row per line, shortest round-trip floats."""
    A = np.asarray(A, dtype=float)
    with open(path, "w") as fh:
        for row in A:
            fh.write(",".join(repr(float(x)) for x in row))
            fh.write("\n")


def load_dense_csv(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)
