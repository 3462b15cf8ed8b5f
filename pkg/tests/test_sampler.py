import math

import numpy as np
import pytest
from scipy.stats import chisquare, kstest

from snmix import SnComponent, SnMixture, delta_of_lambda
from snmix.sampler import (
    child_rng,
    child_seed_int,
    make_rng,
    sample_half_normal,
    sample_mixture,
    sample_sn,
)
from oracles import mixture_quadrature_quantiles, quadrature_cdf

SQRT_2_PI = math.sqrt(2.0 / math.pi)


def sn_moments(mu, sigma2, lam):
    s = math.sqrt(sigma2)
    d = delta_of_lambda(lam)
    mean = mu + s * d * SQRT_2_PI
    var = sigma2 * (1.0 - 2.0 * d * d / math.pi)
    return mean, var


class TestRngPlumbing:
    def test_same_seed_same_stream(self):
        a = make_rng(123).normal(size=10)
        b = make_rng(123).normal(size=10)
        np.testing.assert_array_equal(a, b)

    def test_child_streams_differ_and_are_stable(self):
        a = child_rng(5, 0).normal(size=5)
        b = child_rng(5, 1).normal(size=5)
        assert not np.allclose(a, b)
        np.testing.assert_array_equal(a, child_rng(5, 0).normal(size=5))

    def test_child_seed_int_deterministic(self):
        assert child_seed_int(9, 1, 2) == child_seed_int(9, 1, 2)
        assert child_seed_int(9, 1, 2) != child_seed_int(9, 2, 1)


class TestHalfNormal:
    def test_nonnegative_and_mean(self):
        x = sample_half_normal(1.0, make_rng(0), size=1_000_000)
        assert np.all(x >= 0)
        se = x.std() / 1000.0
        assert abs(x.mean() - SQRT_2_PI) < 3 * se

    def test_scale_equivariance(self):
        x1 = sample_half_normal(1.0, make_rng(7), size=200_000)
        x2 = sample_half_normal(2.0, make_rng(7), size=200_000)
        np.testing.assert_allclose(x2, 2.0 * x1, rtol=1e-12)

    def test_bad_scale(self):
        with pytest.raises(ValueError):
            sample_half_normal(0.0, make_rng(0))


class TestSampleSn:
    def test_symmetric_case_mean(self):
        x = sample_sn(SnComponent(3.0, 4.0, 0.0), make_rng(1), size=1_000_000)
        se = x.std() / 1000.0
        assert abs(x.mean() - 3.0) < 3 * se

    def test_skewed_mean(self):
        x = sample_sn(SnComponent(0.0, 1.0, 5.0), make_rng(2), size=1_000_000)
        se = x.std() / 1000.0
        assert abs(x.mean() - 0.7823901817554268) < 3 * se

    @pytest.mark.parametrize("lam", [-10.0, -1.0, 0.0, 1.0, 10.0])
    @pytest.mark.parametrize("sigma2", [0.25, 1.0, 4.0])
    @pytest.mark.parametrize("mu", [-1.5, 0.0, 2.0])
    def test_moment_grid(self, mu, sigma2, lam):
        n = 1_000_000
        x = sample_sn(SnComponent(mu, sigma2, lam), child_rng(11, int(mu * 2), int(sigma2 * 4), int(lam)), size=n)
        mean, var = sn_moments(mu, sigma2, lam)
        se_mean = math.sqrt(var / n)
        assert abs(x.mean() - mean) < 4 * se_mean
        m4 = np.mean((x - mean) ** 4)
        se_var = math.sqrt(max(m4 - var**2, 0.0) / n)
        assert abs(x.var() - var) < 4 * se_var

    def test_ks_against_quadrature_cdf(self):
        n = 100_000
        x = np.sort(sample_sn(SnComponent(0.0, 1.0, 5.0), make_rng(3), size=n))
        cdf = quadrature_cdf(0.0, 1.0, 5.0, x)
        emp_hi = np.arange(1, n + 1) / n
        emp_lo = np.arange(0, n) / n
        ks = max(np.max(np.abs(emp_hi - cdf)), np.max(np.abs(emp_lo - cdf)))
        assert ks < 1.63 / math.sqrt(n)


class TestSampleMixture:
    def test_determinism(self, model_i):
        a = sample_mixture(model_i, 1000, make_rng(9))
        b = sample_mixture(model_i, 1000, make_rng(9))
        np.testing.assert_array_equal(a, b)

    def test_rejects_bad_n(self, model_i):
        with pytest.raises(ValueError):
            sample_mixture(model_i, 0, make_rng(0))

    def test_single_component_matches_sn_law(self):
        theta = SnComponent(1.0, 2.0, -2.0)
        psi = SnMixture([1.0], [theta])
        x = sample_mixture(psi, 200_000, make_rng(4))
        y = sample_sn(theta, make_rng(5), size=200_000)
        stat, p = __import__("scipy.stats", fromlist=["ks_2samp"]).ks_2samp(x, y)[:2]
        assert p > 1e-3

    def test_mixture_mean(self, model_i):
        n = 1_000_000
        x = sample_mixture(model_i, n, make_rng(6))
        means = [sn_moments(c.mu, c.sigma2, c.lam)[0] for c in model_i.components]
        want = float(np.dot(model_i.weights_array, means))
        se = x.std() / math.sqrt(n)
        assert abs(x.mean() - want) < 3 * se

    @pytest.mark.parametrize("model", ["model_i", "model_ii"])
    def test_chi2_gof_equal_probability_bins(self, model, request):
        psi = request.getfixturevalue(model)
        n = 100_000
        x = sample_mixture(psi, n, make_rng(8))
        probs = np.linspace(0.0, 1.0, 51)[1:-1]
        edges = mixture_quadrature_quantiles(
            psi.weights_array, psi.mu, psi.sigma2, psi.lam, probs
        )
        counts = np.histogram(x, bins=np.concatenate([[-np.inf], edges, [np.inf]]))[0]
        stat, p = chisquare(counts)
        assert p > 1e-3, f"chi2 p-value {p}"
