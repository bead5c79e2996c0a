import numpy as np
import pytest
import scipy.signal
import scipy.stats

from salab.core import NumericalError, seed_rng
from salab.stats import (
    batch_means_se,
    cf_residual,
    default_t_grid,
    effective_sample_size,
    estimate_density,
    gaussian_gof,
    log_density_fit,
)


class TestBatchMeans:
    def test_iid_se_matches_classic(self):
        x = seed_rng(0, 0).standard_normal(100_000)
        se = batch_means_se(x)
        assert se == pytest.approx(x.std(ddof=1) / np.sqrt(x.size), rel=0.25)

    def test_iid_ess_near_n(self):
        x = seed_rng(0, 1).standard_normal(50_000)
        assert effective_sample_size(x) > 0.5 * x.size

    def test_correlated_ess_is_discounted(self):
        # AR(1) with coefficient 0.9 has ESS factor (1-r)/(1+r) ~ 0.053
        n, r = 200_000, 0.9
        eps = seed_rng(0, 2).standard_normal(n)
        x = scipy.signal.lfilter([1.0], [1.0, -r], eps)
        ess = effective_sample_size(x)
        assert ess < 0.2 * n


class TestEstimateDensity:
    def test_standard_normal_recovery(self):
        samples = seed_rng(1, 0).standard_normal(1_000_000)
        grid = np.arange(-4.0, 4.0 + 1e-9, 0.01)
        est = estimate_density(samples, grid)
        assert np.abs(est.density - scipy.stats.norm.pdf(grid)).max() <= 0.01

    def test_integrates_to_one(self):
        samples = seed_rng(1, 1).standard_normal(20_000)
        grid = np.linspace(-5, 5, 601)
        est = estimate_density(samples, grid)
        assert np.trapezoid(est.density, grid) == pytest.approx(1.0, abs=0.02)

    def test_constant_samples_rejected(self):
        with pytest.raises(NumericalError, match="bandwidth"):
            estimate_density(np.ones(5000), np.linspace(-1, 1, 101))

    def test_too_few_samples_rejected(self):
        with pytest.raises(NumericalError, match="1000"):
            estimate_density(np.zeros(999), np.linspace(-1, 1, 101))

    def test_bimodal_mixture_peaks(self):
        rng = seed_rng(1, 2)
        n = 50_000
        comp = rng.integers(0, 2, n)
        samples = np.where(comp == 0, -2.0, 2.0) + np.sqrt(0.1) * rng.standard_normal(n)
        grid = np.linspace(-4, 4, 801)
        est = estimate_density(samples, grid)
        # local maxima near the component means
        for center in (-2.0, 2.0):
            window = np.abs(grid - center) < 0.5
            peak = grid[window][np.argmax(est.density[window])]
            assert abs(peak - center) < 0.2


class TestCfResidual:
    def test_zero_frequency_is_exactly_zero(self):
        samples = seed_rng(2, 0).standard_normal(1000)
        rep = cf_residual(samples, [[-1.0]], [[1.0]], t_grid=[[0.0]])
        assert rep.residual_real[0] == 0.0
        assert rep.residual_imag[0] == 0.0

    def test_limit_law_passes(self):
        # N(0, 1/2) solves the frequency-domain identity for M=-1, Sigma=1
        samples = seed_rng(2, 1).normal(scale=np.sqrt(0.5), size=200_000)
        rep = cf_residual(samples, [[-1.0]], [[1.0]])
        assert np.all(np.hypot(rep.residual_real, rep.residual_imag) <= 5 * rep.se)

    def test_misspecified_variance_closed_form(self):
        # for Y ~ N(0, v) the residual at t is t^2 (1-2v) exp(-v t^2 / 2);
        # with v = 1 and t = 1 this is -exp(-1/2)
        samples = seed_rng(2, 2).standard_normal(400_000)
        rep = cf_residual(samples, [[-1.0]], [[1.0]], t_grid=[[1.0]])
        expected = -np.exp(-0.5)
        assert abs(rep.residual_real[0] - expected) <= 4 * rep.se[0]

    def test_conjugate_symmetry_exact(self):
        samples = seed_rng(2, 3).standard_normal(5000)
        plus = cf_residual(samples, [[-1.0]], [[1.0]], t_grid=[[0.7]])
        minus = cf_residual(samples, [[-1.0]], [[1.0]], t_grid=[[-0.7]])
        assert plus.residual_real[0] == minus.residual_real[0]
        assert plus.residual_imag[0] == -minus.residual_imag[0]

    def test_default_grid_shapes(self):
        assert default_t_grid(1).shape == (8, 1)
        assert default_t_grid(3).shape == (4 * 3 + 8, 3)


class TestGaussianGof:
    def test_self_consistent_draws_pass(self):
        samples = seed_rng(3, 0).normal(scale=np.sqrt(0.5), size=100_000)
        rep = gaussian_gof(samples, [[0.5]])
        assert rep.passed

    def test_wrong_variance_fails(self):
        samples = seed_rng(3, 1).standard_normal(100_000)
        rep = gaussian_gof(samples, [[0.5]])
        assert not rep.passed
        assert rep.cov_rel_err == pytest.approx(1.0, abs=0.05)

    def test_multivariate_draws_pass(self):
        sigma = np.array([[0.5, 0.1], [0.1, 0.25]])
        chol = np.linalg.cholesky(sigma)
        z = seed_rng(3, 2).standard_normal((100_000, 2))
        rep = gaussian_gof(z @ chol.T, sigma)
        assert rep.passed
        assert np.isnan(rep.ks_distance)

    def test_pass_rate_over_repetitions(self):
        passes = 0
        for rep_idx in range(50):
            samples = seed_rng(3, 100 + rep_idx).normal(
                scale=np.sqrt(0.5), size=20_000
            )
            passes += gaussian_gof(samples, [[0.5]]).passed
        assert passes >= 45  # >= 90 percent


class TestLogDensityFit:
    def test_exact_gaussian_log_density_is_linear_in_y2(self):
        v = 0.5
        grid = np.linspace(-3, 3, 401)
        est_like = estimate_density(
            seed_rng(4, 0).normal(scale=np.sqrt(v), size=500_000), grid
        )
        fit = log_density_fit(est_like, q=2)
        assert fit.r_squared >= 0.999
        assert fit.slope == pytest.approx(-1.0 / (2 * v), rel=0.02)

    def test_rejects_bad_exponent(self):
        grid = np.linspace(-3, 3, 101)
        est = estimate_density(seed_rng(4, 1).standard_normal(5000), grid)
        with pytest.raises(NumericalError):
            log_density_fit(est, q=3)

    def test_too_few_points_rejected(self):
        est = estimate_density(
            seed_rng(4, 2).standard_normal(5000), np.linspace(-3, 3, 9)
        )
        with pytest.raises(NumericalError, match="10"):
            log_density_fit(est, q=2)
