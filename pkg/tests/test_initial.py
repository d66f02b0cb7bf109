import numpy as np
import pytest

from bandprec.cholesky import BandedCholesky
from bandprec.initial import (InitialConfig, initial_ols, smooth_bands,
                              window_start)
from bandprec.simulation import ModelSpec, generate


class TestConfig:
    def test_gamma_range(self):
        with pytest.raises(ValueError):
            InitialConfig(gamma=0.0)
        with pytest.raises(ValueError):
            InitialConfig(gamma=1.0)

    def test_bandwidth_range(self):
        with pytest.raises(ValueError):
            InitialConfig(smoothing_bandwidth=0.0)
        with pytest.raises(ValueError):
            InitialConfig(smoothing_bandwidth=1.5)
        InitialConfig(smoothing_bandwidth=None)  # allowed


class TestWindowStart:
    def test_cited_formula(self):
        assert window_start(150, 0.9, 100) == 60

    def test_floor_at_one(self):
        assert window_start(5, 0.9, 100) == 1


class TestInitialOls:
    def test_exact_linear_relation(self):
        rng = np.random.default_rng(0)
        y1 = rng.standard_normal(30)
        Y = np.column_stack([y1, 0.5 * y1])
        T = initial_ols(Y, InitialConfig())
        assert T.band(1)[0] == pytest.approx(0.5)

    def test_matches_full_regression_oracle(self):
        # gamma*n >= p-1: every row regresses on all predecessors, matching
        # a direct per-row least squares oracle
        rng = np.random.default_rng(1)
        n, p = 60, 8
        Y = rng.standard_normal((n, p))
        T = initial_ols(Y, InitialConfig(gamma=0.9))
        for i in range(2, p + 1):
            oracle, *_ = np.linalg.lstsq(Y[:, : i - 1], Y[:, i - 1], rcond=None)
            assert np.allclose(T.row_coefficients(i), oracle, atol=1e-8)

    def test_coefficients_outside_window_zero(self):
        rng = np.random.default_rng(2)
        n, p = 10, 9
        Y = rng.standard_normal((n, p))
        cfg = InitialConfig(gamma=0.45)           # window size 4
        T = initial_ols(Y, cfg)
        for i in range(2, p + 1):
            c = window_start(i, cfg.gamma, n)
            row = T.row_coefficients(i)
            assert np.all(row[: c - 1] == 0.0)
            if c > 1:
                assert np.any(row[c - 1:] != 0.0)

    def test_continue_beyond_window_fills_all(self):
        rng = np.random.default_rng(3)
        n, p = 10, 9
        Y = rng.standard_normal((n, p))
        cfg = InitialConfig(gamma=0.45, continue_beyond_window=True)
        T = initial_ols(Y, cfg)
        row = T.row_coefficients(p)
        assert np.all(row != 0.0)

    def test_continuation_batches_are_separate_regressions(self):
        rng = np.random.default_rng(4)
        n, p = 12, 7
        Y = rng.standard_normal((n, p))
        cfg = InitialConfig(gamma=0.25, continue_beyond_window=True)  # batch 3
        T = initial_ols(Y, cfg)
        i = 7
        c = window_start(i, cfg.gamma, n)          # = 4: window cols 4..6
        batch, *_ = np.linalg.lstsq(Y[:, c - 4: c - 1], Y[:, i - 1], rcond=None)
        assert np.allclose(T.row_coefficients(i)[c - 4: c - 1], batch)

    def test_deterministic(self):
        rng = np.random.default_rng(5)
        Y = rng.standard_normal((20, 6))
        a = initial_ols(Y, InitialConfig())
        b = initial_ols(Y, InitialConfig())
        for x, y in zip(a.bands, b.bands):
            assert np.array_equal(x, y)

    def test_singular_window_jittered_with_warning(self):
        Y = np.zeros((8, 3))
        Y[:, 2] = np.arange(8.0)
        with pytest.warns(RuntimeWarning):
            T = initial_ols(Y, InitialConfig())
        assert np.all(np.isfinite(np.concatenate(T.bands)))

    def test_variances_returned_band_major(self):
        rng = np.random.default_rng(6)
        Y = rng.standard_normal((25, 5))
        T, variances = initial_ols(Y, InitialConfig(), return_variances=True)
        assert len(variances) == 4
        for j, v in enumerate(variances, start=1):
            assert v.shape == (5 - j,)
            assert np.all(v[np.isfinite(v)] >= 0)

    def test_normalized_norms_separate_true_bands(self):
        # windowed-OLS band norms split the nonzero bands {1,2,4,6} from the
        # zero bands on banded autoregressive data
        spec = ModelSpec(kind="ar6_banded", p=50)
        wins = 0
        for seed in range(10):
            Y = generate(spec, 100, "normal", seed=seed)
            T = initial_ols(Y, InitialConfig(gamma=0.9))
            norms = T.band_norms() / np.sqrt([50 - j for j in range(1, 50)])
            true_set = np.array([0, 1, 3, 5])
            mask = np.zeros(49, dtype=bool)
            mask[true_set] = True
            wins += norms[mask].min() > norms[~mask].max()
        assert wins >= 9


class TestSmoothBands:
    def test_requires_bandwidth(self):
        T = BandedCholesky.identity(8)
        with pytest.raises(ValueError):
            smooth_bands(T, InitialConfig(smoothing_bandwidth=None))

    def test_constant_band_unchanged(self):
        p = 30
        bands = [np.zeros(p - j) for j in range(1, p)]
        bands[0][:] = 0.3
        T = BandedCholesky(p=p, bands=tuple(bands))
        out = smooth_bands(T, InitialConfig(smoothing_bandwidth=0.3))
        assert np.allclose(out.band(1), 0.3, atol=1e-12)

    def test_linear_band_unchanged(self):
        p = 40
        bands = [np.zeros(p - j) for j in range(1, p)]
        x = (1 + np.arange(1, p)) / p
        bands[0][:] = 0.1 + 0.7 * x
        T = BandedCholesky(p=p, bands=tuple(bands))
        out = smooth_bands(T, InitialConfig(smoothing_bandwidth=0.3))
        assert np.allclose(out.band(1), bands[0], atol=1e-10)

    def test_polynomials_preserved_under_precision_weights(self):
        p = 40
        rng = np.random.default_rng(0)
        bands = [np.zeros(p - j) for j in range(1, p)]
        x = (1 + np.arange(1, p)) / p
        bands[0][:] = -0.2 + 0.5 * x
        T = BandedCholesky(p=p, bands=tuple(bands))
        variances = [rng.uniform(0.1, 5.0, size=p - j) for j in range(1, p)]
        out = smooth_bands(T, InitialConfig(smoothing_bandwidth=0.3),
                           tuple(variances))
        assert np.allclose(out.band(1), bands[0], atol=1e-10)

    def test_noise_variance_reduced(self):
        rng = np.random.default_rng(1)
        p = 101
        bands = [np.zeros(p - j) for j in range(1, p)]
        bands[0][:] = 0.5 + rng.normal(0.0, 0.1, size=p - 1)
        T = BandedCholesky(p=p, bands=tuple(bands))
        out = smooth_bands(T, InitialConfig(smoothing_bandwidth=0.3))
        assert np.var(out.band(1)) < np.var(T.band(1))

    def test_zero_bands_stay_zero(self):
        T = BandedCholesky.identity(20)
        out = smooth_bands(T, InitialConfig(smoothing_bandwidth=0.3))
        for b in out.bands:
            assert np.all(b == 0.0)

    def test_short_bands_pass_through(self):
        p = 8
        rng = np.random.default_rng(2)
        bands = tuple(rng.standard_normal(p - j) for j in range(1, p))
        T = BandedCholesky(p=p, bands=bands)
        out = smooth_bands(T, InitialConfig(smoothing_bandwidth=0.3,
                                            min_smooth_length=5))
        for j in range(1, p):
            if p - j < 5:
                assert np.array_equal(out.band(j), T.band(j))
