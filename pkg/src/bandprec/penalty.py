"""SCAD block penalty, per-block tuning constants, and the fit objectives.

Each off-diagonal band of the Cholesky factor is penalized through the L2
norm of the whole band, so a band is killed or kept as a unit.  The shortest
(far) bands are stacked into a single tail block so every block has length
of order p.  The penalty applied to block j uses the tuning constant
``lambda * sqrt(block length)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ScadParams:
    """SCAD penalty parameters.

    ``conventional=False`` evaluates the derivative exactly as
    ``lambda * 1{theta <= lambda} + (a*lambda - theta)_+ * 1{theta > lambda}``;
    ``conventional=True`` divides the middle branch by ``a - 1`` (the Fan-Li
    form).
    """

    lam: float
    a: float = 3.7
    conventional: bool = False

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.a <= 2:
            raise ValueError(f"SCAD shape a must be > 2, got {self.a}")


def scad_derivative(theta, params):
    """p'_lambda(theta) for scalar theta >= 0."""
    if theta < 0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    lam, a = params.lam, params.a
    if theta <= lam:
        return lam
    mid = max(a * lam - theta, 0.0)
    if params.conventional:
        mid /= a - 1.0
    return mid


def scad_penalty(theta, params):
    """p_lambda(theta): exact piecewise integral of the printed derivative.

    Continuous, non-decreasing, constant beyond ``a * lambda``.
    """
    if theta < 0:
        raise ValueError(f"theta must be >= 0, got {theta}")
    lam, a = params.lam, params.a
    if theta <= lam:
        return lam * theta
    div = (a - 1.0) if params.conventional else 1.0
    t = min(theta, a * lam)
    # integral of (a*lam - u)/div over (lam, t], added to the first branch
    mid = (a * lam * (t - lam) - 0.5 * (t * t - lam * lam)) / div
    return lam * lam + mid


@dataclass(frozen=True)
class BlockPartition:
    """Partition of bands 1..p-1 into s_n penalty blocks.

    Block j < s_n is band j alone; block s_n stacks bands s_n..p-1.
    """

    p: int
    s_n: int

    def __post_init__(self):
        if not 1 <= self.s_n <= self.p - 1:
            raise ValueError(
                f"s_n must lie in [1, {self.p - 1}] for p={self.p}, got {self.s_n}"
            )

    @classmethod
    def default(cls, p):
        """Stacking rule s_n = p - ceil(2 sqrt(p)), clamped to [1, p-1]."""
        s_n = p - math.ceil(2.0 * math.sqrt(p))
        return cls(p=p, s_n=min(max(s_n, 1), p - 1))

    @property
    def n_blocks(self):
        return self.s_n

    def block_length(self, j):
        """Number of coefficients in block j, 1 <= j <= s_n."""
        if not 1 <= j <= self.s_n:
            raise IndexError(f"block index {j} out of range [1, {self.s_n}]")
        if j < self.s_n:
            return self.p - j
        return sum(self.p - b for b in range(self.s_n, self.p))

    def block_lengths(self):
        return np.array([self.block_length(j) for j in range(1, self.s_n + 1)])

    def band_to_block(self, band):
        """Block index owning a given band."""
        if not 1 <= band <= self.p - 1:
            raise IndexError(f"band index {band} out of range [1, {self.p - 1}]")
        return min(band, self.s_n)

    def block_bands(self, j):
        """Band indices making up block j."""
        if j < self.s_n:
            return [j]
        return list(range(self.s_n, self.p))

    def block_norms(self, factor):
        """L2 norm of every block of a factor; the tail block is the norm of
        the concatenation of its bands."""
        band_sq = np.array([float(b @ b) for b in factor.bands])
        out = np.empty(self.s_n)
        out[: self.s_n - 1] = np.sqrt(band_sq[: self.s_n - 1])
        out[self.s_n - 1] = np.sqrt(band_sq[self.s_n - 1:].sum())
        return out


def band_lambda(lam, part, j):
    """Per-block tuning constant lambda * sqrt(block length)."""
    return lam * math.sqrt(part.block_length(j))


def block_weights(ref, params, part, n):
    """Weights w_j = n * p'_{lambda_j}(||block j of ref||) / lambda.

    ``ref`` is the current linearization point.  Undefined at lambda = 0
    (the caller must special-case the unpenalized fit).
    """
    if params.lam <= 0:
        raise ValueError("block weights are undefined for lambda <= 0")
    norms = part.block_norms(ref)
    w = np.empty(part.s_n)
    for j in range(1, part.s_n + 1):
        lam_j = band_lambda(params.lam, part, j)
        block_params = ScadParams(lam=lam_j, a=params.a,
                                  conventional=params.conventional)
        w[j - 1] = n * scad_derivative(norms[j - 1], block_params) / params.lam
    return w


def objective_ls(Y, factor):
    """Least squares objective: sum over rows i and columns j >= 2 of the
    squared regression residual of column j on its predecessors."""
    Y = np.asarray(Y, dtype=float)
    R = Y @ factor.to_dense().T
    return float(np.sum(R[:, 1:] ** 2))


def objective_penalized(Y, factor, params, part):
    """Block-penalized least squares: L_n + n * sum_j p_{lambda_j}(||block j||)."""
    n = np.asarray(Y).shape[0]
    norms = part.block_norms(factor)
    pen = 0.0
    for j in range(1, part.s_n + 1):
        lam_j = band_lambda(params.lam, part, j)
        block_params = ScadParams(lam=lam_j, a=params.a,
                                  conventional=params.conventional)
        pen += scad_penalty(norms[j - 1], block_params)
    return objective_ls(Y, factor) + n * pen
