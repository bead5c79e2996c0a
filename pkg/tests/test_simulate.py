import numpy as np
import pytest

import salab.simulate as sim
from salab.core import (
    ExperimentConfig,
    NumericalError,
    PowerScaling,
    seed_rng,
    validate_config,
)
from salab.drift import grad_quadratic, linear, quartic
from salab.noise import make_noise
from salab.simulate import (
    ChainEnsemble,
    moment_summary,
    run_chains,
    run_ensemble,
    snapshot_scaled,
    step_chain,
)
from salab.stats import batch_means_se


def quadratic_config(alpha, *, shape="gaussian", n_chains=64, spc=512,
                     burn_in="auto", thin="auto", seed=0):
    cfg = ExperimentConfig(
        drift="grad_quadratic",
        noise_shape=shape,
        noise_sigma=[[1.0]],
        alphas=(alpha,),
        scaling=0.5,
        n_chains=n_chains,
        burn_in=burn_in,
        thin=thin,
        samples_per_chain=spc,
        seed=seed,
    )
    return validate_config(cfg)


class TestStepChain:
    def test_noiseless_linear(self):
        op = linear([[-1.0]])
        nm = make_noise("noiseless", [[0.0]])
        out = step_chain(op, nm, 0.1, [1.0], seed_rng(0, 0))
        assert out == pytest.approx([0.9])

    def test_noiseless_cubic(self):
        nm = make_noise("noiseless", [[0.0]])
        out = step_chain(quartic(), nm, 0.1, [2.0], seed_rng(0, 0))
        assert out == pytest.approx([1.2])

    def test_pure_noise_step(self):
        # F(0) = 0, so the update is exactly alpha * w
        op = linear([[-1.0]])
        nm = make_noise("gaussian", [[1.0]])
        rng = seed_rng(4, 0)
        w = seed_rng(4, 0).standard_normal((1, 1))[0, 0]
        out = step_chain(op, nm, 0.1, [0.0], rng)
        assert out[0] == pytest.approx(0.1 * w)


class TestRunEnsemble:
    def test_noiseless_from_root_stays_at_root(self):
        cfg = validate_config(
            ExperimentConfig(
                drift="grad_quadratic", noise_shape="noiseless",
                noise_sigma=[[0.0]], alphas=(0.01,), scaling=0.5,
                n_chains=4, samples_per_chain=16,
            )
        )
        ens = run_ensemble(cfg, 0.01)
        assert np.all(ens.samples == 0.0)

    def test_stationary_variance_matches_ar1(self):
        # exact stationary variance of the scaled iterate is 1/(2 - alpha)
        alpha = 0.01
        cfg = quadratic_config(alpha, n_chains=64, spc=512, seed=1)
        ens = run_ensemble(cfg, alpha)
        flat = ens.flat[:, 0]
        target = 1.0 / (2.0 - alpha)
        se = batch_means_se((flat - flat.mean()) ** 2)
        assert abs(flat.var(ddof=1) - target) <= 3 * se

    def test_stationary_mean_is_zero(self):
        alpha = 0.01
        cfg = quadratic_config(alpha, seed=2)
        ens = run_ensemble(cfg, alpha)
        flat = ens.flat[:, 0]
        assert abs(flat.mean()) <= 3 * batch_means_se(flat)

    def test_lemma_bound_on_second_moment(self):
        # E||Y||^2 <= trace(Sigma) / (2 sigma - L^2 alpha) for certified drifts
        alpha = 0.1
        cfg = validate_config(
            ExperimentConfig(
                drift="grad_quadratic",
                drift_params={"hessian": [[1.0, 0.0], [0.0, 2.0]]},
                noise_sigma=np.eye(2).tolist(),
                alphas=(alpha,), scaling=0.5, n_chains=64,
                samples_per_chain=256, seed=3, alpha_max=0.25,
            )
        )
        ens = run_ensemble(cfg, alpha)
        cert = cfg.op.certificate
        bound = 2.0 / (2 * cert.strong_convexity - cert.smoothness**2 * alpha)
        z = (ens.flat**2).sum(axis=1)
        assert z.mean() <= bound + 4 * batch_means_se(z)

    def test_unstable_configuration_raises(self):
        cfg = validate_config(
            ExperimentConfig(
                drift="quartic", alphas=(0.25,), scaling=0.25, n_chains=16,
                burn_in=0, thin=1, samples_per_chain=2048, seed=4,
                noise_sigma=[[64.0]],
            )
        )
        with pytest.raises(NumericalError, match="unstable configuration"):
            run_ensemble(cfg, 0.25)

    def test_thread_count_invariance(self):
        alpha = 0.05
        cfg = quadratic_config(alpha, n_chains=16, spc=64, seed=5)
        single = run_ensemble(cfg, alpha, threads=1)
        multi = run_ensemble(cfg, alpha, threads=4)
        assert np.array_equal(single.samples, multi.samples)

    def test_group_width_invariance(self, monkeypatch):
        alpha = 0.05
        cfg = quadratic_config(alpha, n_chains=24, spc=64, seed=6)
        wide = run_ensemble(cfg, alpha)
        monkeypatch.setattr(sim, "_CHAIN_GROUP", 7)
        narrow = run_ensemble(cfg, alpha)
        assert np.array_equal(wide.samples, narrow.samples)

    @pytest.mark.parametrize("shape", ["gaussian", "rademacher", "uniform"])
    def test_noise_shape_universality(self, shape):
        # same Sigma, same alpha: stationary covariances agree within 6 SE
        alpha = 0.005
        cfg = quadratic_config(alpha, shape=shape, n_chains=64, spc=256, seed=7)
        flat = run_ensemble(cfg, alpha).flat[:, 0]
        target = 1.0 / (2.0 - alpha)
        se = batch_means_se((flat - flat.mean()) ** 2)
        assert abs(flat.var(ddof=1) - target) <= 6 * se


class TestFiniteKOracle:
    def test_transient_law_matches_closed_form(self):
        # for F(x) = -x with standard normal noise started from y0,
        # Y_k ~ N((1-a)^k y0, (1 - (1-a)^(2k)) / (2-a))
        alpha, y0 = 0.01, 3.0
        op, nm = grad_quadratic(), make_noise("gaussian", [[1.0]])
        ks = (10, 100, 1000)
        snaps = snapshot_scaled(
            op, nm, alpha, PowerScaling(0.5), ks,
            n_chains=20000, seed=11, init_scaled=y0,
        )
        for k in ks:
            y = snaps[k][:, 0]
            mean_k = (1 - alpha) ** k * y0
            var_k = (1 - (1 - alpha) ** (2 * k)) / (2 - alpha)
            n = y.size
            assert abs(y.mean() - mean_k) <= 4 * np.sqrt(var_k / n)
            assert abs(y.var(ddof=1) - var_k) <= 4 * var_k * np.sqrt(2.0 / n)


class TestMomentSummary:
    def _ensemble_from(self, values):
        values = np.asarray(values, dtype=float).reshape(1, -1, 1)
        return ChainEnsemble(
            alpha=0.01, scaling=PowerScaling(0.5), samples=values,
            final_states=values[:, -1, :], chain_ids=np.array([0]),
            n_diverged=0, drift_name="grad_quadratic", noise_shape="gaussian",
        )

    def test_two_point_sample(self):
        mom = moment_summary(self._ensemble_from([1.0, -1.0]))
        assert mom.mean[0] == pytest.approx(0.0)
        assert mom.covariance[0, 0] == pytest.approx(2.0)  # n-1 divisor
        assert mom.second_moment_trace == pytest.approx(1.0)

    def test_gaussian_draws(self):
        draws = seed_rng(8, 0).normal(scale=np.sqrt(0.5), size=1_000_000)
        mom = moment_summary(self._ensemble_from(draws))
        assert abs(mom.covariance[0, 0] - 0.5) < 0.005

    def test_trace_bound_for_unit_quadratic(self):
        alpha = 0.01
        cfg = quadratic_config(alpha, seed=9)
        mom = moment_summary(run_ensemble(cfg, alpha))
        assert mom.second_moment_trace <= 1.0 + 0.05  # trace(Sigma)/sigma + 0.05

    def test_empty_rejected(self):
        with pytest.raises(NumericalError):
            moment_summary(self._ensemble_from([1.0]))


class TestDivergenceHandling:
    def test_diverged_chains_are_dropped_and_counted(self):
        # huge stepsize on the cubic drift explodes immediately from any
        # nonzero state; count survivors via the raw engine
        op, nm = quartic(), make_noise("gaussian", [[1.0]])
        raw = run_chains(
            op, nm, drift_coeff=10.0, noise_coeff=10.0, n_chains=8,
            burn_in=0, thin=1, samples_per_chain=64, seed=10,
        )
        assert raw.n_diverged == 8
        assert raw.samples.shape[0] == 0
