import math

import numpy as np
import pytest

from bandprec.cholesky import BandedCholesky
from bandprec.penalty import (BlockPartition, ScadParams, band_lambda,
                              block_weights, objective_ls,
                              objective_penalized, scad_derivative,
                              scad_penalty)


class TestScadDerivative:
    def test_at_zero(self):
        assert scad_derivative(0.0, ScadParams(lam=0.2)) == 0.2

    def test_middle_branch(self):
        assert scad_derivative(2.0, ScadParams(lam=1.0, a=3.7)) == pytest.approx(1.7)

    def test_plateau(self):
        params = ScadParams(lam=0.5, a=3.7)
        assert scad_derivative(3.7 * 0.5 + 0.1, params) == 0.0

    def test_negative_theta_rejected(self):
        with pytest.raises(ValueError):
            scad_derivative(-0.1, ScadParams(lam=1.0))

    def test_shape_constraints(self):
        with pytest.raises(ValueError):
            ScadParams(lam=-1.0)
        with pytest.raises(ValueError):
            ScadParams(lam=1.0, a=2.0)

    def test_piecewise_properties(self):
        params = ScadParams(lam=0.8, a=3.7)
        grid = np.linspace(0, 5, 400)
        vals = [scad_derivative(t, params) for t in grid]
        assert all(v >= 0 for v in vals)
        assert all(v == 0.8 for t, v in zip(grid, vals) if t <= 0.8)
        tail = [(t, v) for t, v in zip(grid, vals) if t > 0.8]
        assert all(a >= b for (_, a), (_, b) in zip(tail, tail[1:]))
        assert all(v == 0.0 for t, v in zip(grid, vals) if t >= 3.7 * 0.8)

    def test_conventional_divisor(self):
        base = ScadParams(lam=1.0, a=3.7)
        conv = ScadParams(lam=1.0, a=3.7, conventional=True)
        assert scad_derivative(2.0, conv) == pytest.approx(
            scad_derivative(2.0, base) / 2.7)


class TestScadPenalty:
    def test_first_branch_linear(self):
        params = ScadParams(lam=0.5)
        assert scad_penalty(0.3, params) == pytest.approx(0.5 * 0.3)

    @pytest.mark.parametrize("conventional", [False, True])
    def test_matches_quadrature_of_derivative(self, conventional):
        # the printed derivative jumps at theta = lambda, so the trapezoid
        # oracle carries a one-cell overshoot there; tolerance covers it
        params = ScadParams(lam=0.7, a=3.7, conventional=conventional)
        grid = np.linspace(0, 4.0, 20001)
        dvals = np.array([scad_derivative(t, params) for t in grid])
        for theta in (0.2, 0.7, 1.5, 2.59, 3.0, 3.9):
            k = int(theta / 4.0 * 20000)
            oracle = np.trapezoid(dvals[: k + 1], grid[: k + 1])
            assert scad_penalty(grid[k], params) == pytest.approx(oracle, abs=3e-4)

    def test_continuous_nondecreasing_constant_tail(self):
        params = ScadParams(lam=0.6, a=3.7)
        grid = np.linspace(0, 5, 1000)
        vals = np.array([scad_penalty(t, params) for t in grid])
        assert np.all(np.diff(vals) >= -1e-12)
        gaps = np.abs(np.diff(vals))
        assert gaps.max() < 0.01  # no jumps across branch points
        plateau = vals[grid >= 3.7 * 0.6]
        assert np.ptp(plateau) < 1e-12


class TestBlockPartition:
    def test_default_stacking_rule(self):
        part = BlockPartition.default(9)
        assert part.s_n == 9 - math.ceil(2 * math.sqrt(9))

    def test_block_lengths_cover_all_coefficients(self):
        for p in (5, 9, 30):
            part = BlockPartition.default(p)
            assert part.block_lengths().sum() == p * (p - 1) // 2

    def test_stacked_block_length_example(self):
        part = BlockPartition(p=9, s_n=3)
        assert part.block_length(3) == sum(9 - j for j in range(3, 9))

    def test_band_to_block(self):
        part = BlockPartition(p=9, s_n=3)
        assert part.band_to_block(1) == 1
        assert part.band_to_block(2) == 2
        for b in range(3, 9):
            assert part.band_to_block(b) == 3

    def test_block_norms_stacked(self):
        part = BlockPartition(p=4, s_n=2)
        T = BandedCholesky(p=4, bands=(np.array([1.0, 2.0, 2.0]),
                                       np.array([3.0, 4.0]),
                                       np.array([0.0])))
        norms = part.block_norms(T)
        assert norms[0] == pytest.approx(3.0)
        assert norms[1] == pytest.approx(5.0)


class TestBandLambda:
    def test_band_formula(self):
        part = BlockPartition(p=101, s_n=100)
        assert band_lambda(0.1, part, 1) == pytest.approx(1.0)

    def test_zero_lambda(self):
        part = BlockPartition.default(10)
        assert band_lambda(0.0, part, 2) == 0.0

    def test_stacked_lambda(self):
        part = BlockPartition(p=9, s_n=3)
        assert band_lambda(0.3, part, 3) == pytest.approx(0.3 * math.sqrt(21))


class TestBlockWeights:
    def test_zero_factor_gives_group_lasso_weights(self):
        p, n = 10, 50
        part = BlockPartition.default(p)
        w = block_weights(BandedCholesky.identity(p), ScadParams(lam=0.1),
                          part, n)
        expected = n * np.sqrt(part.block_lengths())
        assert np.allclose(w, expected)

    def test_plateau_blocks_unweighted(self):
        p, n = 6, 20
        part = BlockPartition(p=p, s_n=p - 1)
        bands = tuple(np.full(p - j, 10.0) for j in range(1, p))
        w = block_weights(BandedCholesky(p=p, bands=bands),
                          ScadParams(lam=0.01), part, n)
        assert np.all(w == 0.0)

    def test_middle_branch_weight(self):
        p, n, lam = 8, 30, 0.2
        part = BlockPartition(p=p, s_n=p - 1)
        bands = [np.zeros(p - j) for j in range(1, p)]
        lam_1 = lam * math.sqrt(p - 1)
        bands[0][0] = 2.0 * lam_1          # band norm exactly 2*lambda_1
        w = block_weights(BandedCholesky(p=p, bands=tuple(bands)),
                          ScadParams(lam=lam, a=3.7), part, n)
        assert w[0] == pytest.approx(n * 1.7 * math.sqrt(p - 1))

    def test_lambda_zero_rejected(self):
        part = BlockPartition.default(5)
        with pytest.raises(ValueError):
            block_weights(BandedCholesky.identity(5), ScadParams(lam=0.0),
                          part, 10)


def naive_ls(Y, factor):
    n, p = Y.shape
    total = 0.0
    for i in range(n):
        for j in range(2, p + 1):
            pred = 0.0
            for k in range(1, j):
                pred += Y[i, k - 1] * factor.bands[j - k - 1][k - 1]
            total += (Y[i, j - 1] - pred) ** 2
    return total


class TestObjectives:
    def test_noiseless_truth_is_zero(self):
        rng = np.random.default_rng(0)
        p, n = 5, 12
        bands = tuple(rng.uniform(-0.5, 0.5, size=p - j) for j in range(1, p))
        factor = BandedCholesky(p=p, bands=bands)
        eps = np.zeros((n, p))
        eps[:, 0] = rng.standard_normal(n)
        Y = np.linalg.solve(factor.to_dense(), eps.T).T
        assert objective_ls(Y, factor) == pytest.approx(0.0, abs=1e-18)

    def test_zero_factor_sums_squares(self):
        rng = np.random.default_rng(1)
        Y = rng.standard_normal((7, 4))
        expected = float(np.sum(Y[:, 1:] ** 2))
        assert objective_ls(Y, BandedCholesky.identity(4)) == pytest.approx(expected)

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(2)
        p, n = 6, 9
        Y = rng.standard_normal((n, p))
        bands = tuple(rng.uniform(-0.5, 0.5, size=p - j) for j in range(1, p))
        factor = BandedCholesky(p=p, bands=bands)
        assert objective_ls(Y, factor) == pytest.approx(naive_ls(Y, factor),
                                                        rel=1e-10)

    def test_penalized_reduces_to_ls_at_zero_lambda(self):
        rng = np.random.default_rng(3)
        Y = rng.standard_normal((8, 5))
        factor = BandedCholesky.identity(5)
        part = BlockPartition.default(5)
        assert objective_penalized(Y, factor, ScadParams(lam=0.0), part) == \
            pytest.approx(objective_ls(Y, factor))

    def test_penalized_first_branch(self):
        rng = np.random.default_rng(4)
        Y = rng.standard_normal((10, 2))
        theta = 0.05
        factor = BandedCholesky(p=2, bands=(np.array([theta]),))
        part = BlockPartition(p=2, s_n=1)
        lam = 1.0
        lam_1 = band_lambda(lam, part, 1)
        assert theta <= lam_1
        got = objective_penalized(Y, factor, ScadParams(lam=lam), part)
        assert got == pytest.approx(objective_ls(Y, factor)
                                    + 10 * lam_1 * theta)

    def test_penalized_plateau_constant(self):
        # beyond a*lambda the block contribution equals its plateau value,
        # checked against numeric integration of the derivative
        rng = np.random.default_rng(5)
        Y = rng.standard_normal((6, 2))
        part = BlockPartition(p=2, s_n=1)
        lam = 0.5
        params = ScadParams(lam=lam)
        lam_1 = band_lambda(lam, part, 1)
        grid = np.linspace(0, 6 * lam_1, 50001)
        dvals = np.array([scad_derivative(t, ScadParams(lam=lam_1)) for t in grid])
        oracle_plateau = np.trapezoid(dvals, grid)
        for theta in (3.8 * lam_1, 5.0 * lam_1):
            factor = BandedCholesky(p=2, bands=(np.array([theta]),))
            got = objective_penalized(Y, factor, params, part)
            assert got == pytest.approx(objective_ls(Y, factor)
                                        + 6 * oracle_plateau, abs=1e-4)
