import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from snmix import (
    PenaltySpec,
    ScalePenalty,
    ShapePenalty,
    SnComponent,
    SnMixture,
    delta_of_lambda,
    inverse_mills,
    loglik,
    mixture_logpdf,
    penalized_loglik,
    penalty_lambda,
    penalty_lambda_azzalini,
    penalty_sigma,
    sn_logpdf,
    tuning,
)
from conftest import random_mixture
from oracles import mp_sn_logpdf

LOG_PHI0 = -0.9189385332046727


class TestSnLogpdf:
    def test_standard_normal_point(self):
        assert sn_logpdf(0.0, SnComponent(0, 1, 0)) == pytest.approx(LOG_PHI0, abs=1e-12)

    def test_symmetry_point_ignores_shape(self):
        # lambda * 0 = 0, so Phi contributes exactly 1/2
        assert sn_logpdf(0.0, SnComponent(0, 1, 5)) == pytest.approx(LOG_PHI0, abs=1e-12)

    def test_left_tail_against_high_precision(self):
        # frozen from an erfc-based mpmath evaluation of log(2 phi(-1) Phi(-5))
        assert sn_logpdf(-1.0, SnComponent(0, 1, 5)) == pytest.approx(
            -15.790789746633453, rel=1e-13
        )

    def test_matches_mpmath_on_random_points(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            mu, s2, lam = rng.normal(), rng.uniform(0.1, 5), rng.normal(0, 4)
            x = rng.normal(mu, 3 * math.sqrt(s2))
            assert sn_logpdf(x, SnComponent(mu, s2, lam)) == pytest.approx(
                mp_sn_logpdf(x, mu, s2, lam), rel=1e-11, abs=1e-11
            )

    def test_finite_deep_in_tail(self):
        v = sn_logpdf(-60.0, SnComponent(0, 1, 10))
        assert np.isfinite(v) and v < -1000

    def test_zero_shape_equals_normal_exactly(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=10_000)
        mu = rng.normal(size=10_000)
        s2 = rng.uniform(0.1, 9.0, size=10_000)
        for xi, mi, vi in zip(x[:200], mu[:200], s2[:200]):
            lhs = sn_logpdf(xi, SnComponent(mi, vi, 0.0))
            rhs = norm.logpdf(xi, mi, math.sqrt(vi))
            assert lhs == pytest.approx(rhs, abs=1e-14 * max(1, abs(rhs)))

    def test_density_integrates_to_one(self):
        for lam in (-10, -1, 0, 1, 10):
            for s2 in (0.25, 1.0, 4.0):
                theta = SnComponent(0.7, s2, lam)
                s = math.sqrt(s2)
                val, _ = quad(
                    lambda x: math.exp(sn_logpdf(x, theta)),
                    0.7 - 12 * s, 0.7 + 12 * s, limit=200,
                )
                assert val == pytest.approx(1.0, abs=1e-6)

    def test_invalid_component_rejected(self):
        with pytest.raises(ValueError):
            SnComponent(0.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            SnComponent(0.0, -1.0, 1.0)
        with pytest.raises(ValueError):
            SnComponent(math.nan, 1.0, 1.0)


class TestMixtureLogpdf:
    def test_single_component_reduces(self):
        theta = SnComponent(1.0, 2.0, -3.0)
        psi = SnMixture([1.0], [theta])
        for x in (-2.0, 0.0, 4.5):
            assert mixture_logpdf(x, psi) == pytest.approx(sn_logpdf(x, theta), abs=1e-13)

    def test_model_i_value(self, model_i):
        # frozen from a direct high-precision summation oracle
        assert mixture_logpdf(0.0, model_i) == pytest.approx(-2.778184081903358, rel=1e-12)

    def test_zero_weight_duplicate_component(self):
        theta = SnComponent(0.5, 1.5, 2.0)
        one = SnMixture([1.0, 0.0], [theta, theta])
        half = SnMixture([0.5, 0.5], [theta, theta])
        for x in (-1.0, 0.0, 3.0):
            assert mixture_logpdf(x, one) == pytest.approx(mixture_logpdf(x, half), abs=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            psi = random_mixture(rng, p=3)
            perm = rng.permutation(3)
            psi_p = SnMixture(
                [psi.weights[k] for k in perm], [psi.components[k] for k in perm]
            )
            x = rng.normal(size=7)
            np.testing.assert_allclose(
                mixture_logpdf(x, psi), mixture_logpdf(x, psi_p), rtol=0, atol=1e-12
            )

    def test_invalid_weights_rejected(self):
        theta = SnComponent(0, 1, 0)
        with pytest.raises(ValueError):
            SnMixture([0.6, 0.6], [theta, theta])
        with pytest.raises(ValueError):
            SnMixture([-0.1, 1.1], [theta, theta])
        with pytest.raises(ValueError):
            SnMixture([], [])


class TestLoglik:
    def test_single_observation(self, model_i):
        assert loglik([0.3], model_i) == pytest.approx(mixture_logpdf(0.3, model_i))

    def test_duplication_doubles(self, model_i):
        rng = np.random.default_rng(4)
        data = rng.normal(size=40)
        assert loglik(np.tile(data, 2), model_i) == pytest.approx(
            2 * loglik(data, model_i), rel=1e-12
        )

    def test_empty_rejected(self, model_i):
        with pytest.raises(ValueError):
            loglik([], model_i)


class TestPenalties:
    def test_sigma_zero_at_sn2(self):
        assert penalty_sigma(1.7, 0.3, 1.7) == pytest.approx(0.0, abs=1e-15)

    def test_sigma_disabled(self):
        for s2 in (0.01, 1.0, 50.0):
            assert penalty_sigma(s2, 0.0, 2.0) == 0.0

    def test_sigma_arithmetic_value(self):
        assert penalty_sigma(0.5, 0.01, 1.0) == pytest.approx(
            -0.01 * (2.0 + math.log(0.5) - 1.0), rel=1e-13
        )

    def test_sigma_nonpositive_and_unbounded(self):
        s2 = np.geomspace(1e-8, 1e8, 60)
        vals = penalty_sigma(s2, 0.5, 1.3)
        assert np.all(vals <= 0)
        assert vals[0] < -1e6 and vals[-1] < -1
        assert penalty_sigma(1.3, 0.5, 1.3) == pytest.approx(0.0, abs=1e-14)

    def test_sigma_domain_error(self):
        with pytest.raises(ValueError):
            penalty_sigma(0.0, 0.1, 1.0)
        with pytest.raises(ValueError):
            penalty_sigma(-1.0, 0.1, 1.0)

    def test_lambda_zero_at_origin_even_decreasing(self):
        assert penalty_lambda(0.0, 0.2) == 0.0
        lams = np.linspace(0.1, 30, 50)
        vals = penalty_lambda(lams, 0.2)
        assert np.all(vals < 0)
        assert np.all(np.diff(vals) < 0)
        np.testing.assert_allclose(penalty_lambda(-lams, 0.2), vals, rtol=1e-14)

    def test_lambda_arithmetic_value(self):
        b_n = 0.05 / math.log(100)
        assert penalty_lambda(5.0, b_n) == pytest.approx(
            -b_n * (25 - math.log(26)), rel=1e-13
        )

    def test_azzalini_values(self):
        assert penalty_lambda_azzalini(0.0) == 0.0
        assert penalty_lambda_azzalini(1.0, 0.876, 0.856) == pytest.approx(
            -0.876 * math.log(1.856), rel=1e-13
        )
        assert penalty_lambda_azzalini(-3.2, 0.876, 0.856) == pytest.approx(
            penalty_lambda_azzalini(3.2, 0.876, 0.856), rel=1e-14
        )


class TestPenalizedLoglik:
    def test_all_none_equals_loglik(self, model_i):
        rng = np.random.default_rng(5)
        data = rng.normal(size=30)
        assert penalized_loglik(data, model_i, PenaltySpec()) == loglik(data, model_i)

    def test_vanishing_at_reference_point(self):
        psi = SnMixture.from_arrays([0.4, 0.6], [-1, 1], [2.0, 2.0], [0.0, 0.0])
        pen = PenaltySpec(sigma=ScalePenalty(0.3, 2.0), lam=ShapePenalty(0.7))
        data = np.linspace(-2, 2, 25)
        assert penalized_loglik(data, psi, pen) == pytest.approx(
            loglik(data, psi), abs=1e-12
        )

    def test_data_order_invariance(self, model_i):
        rng = np.random.default_rng(6)
        data = rng.normal(size=50)
        pen = PenaltySpec(sigma=ScalePenalty(0.1, 1.0), lam=ShapePenalty(0.05))
        a = penalized_loglik(data, model_i, pen)
        b = penalized_loglik(rng.permutation(data), model_i, pen)
        assert a == pytest.approx(b, abs=1e-12 * abs(a))


class TestTuning:
    def test_default_constants(self):
        a_n, b_n = tuning(100)
        assert a_n == pytest.approx(0.01, rel=1e-15)
        assert b_n == pytest.approx(0.05 / math.log(100), rel=1e-15)

    def test_switched_off(self):
        assert tuning(500, 0.0, 0.0) == (0.0, 0.0)

    def test_log_two_point(self):
        # n = e^2 makes log n = 2 exactly
        _, b_n = tuning(math.e ** 2, 1.0, 0.05)
        assert b_n == pytest.approx(0.025, rel=1e-12)

    def test_small_n_rejected(self):
        with pytest.raises(ValueError):
            tuning(1)


class TestDeltaAndMills:
    def test_delta_values(self):
        assert delta_of_lambda(0.0) == 0.0
        assert delta_of_lambda(1.0) == pytest.approx(1 / math.sqrt(2), rel=1e-15)
        assert delta_of_lambda(-3.0) == pytest.approx(-3 / math.sqrt(10), rel=1e-15)

    def test_delta_monotone_odd_bounded(self):
        lam = np.linspace(-50, 50, 401)
        d = delta_of_lambda(lam)
        assert np.all(np.diff(d) > 0)
        assert np.all(np.abs(d) < 1)
        np.testing.assert_allclose(delta_of_lambda(-lam), -d, rtol=1e-15)

    def test_mills_analytic_and_tail(self):
        assert inverse_mills(0.0) == pytest.approx(0.7978845608028654, rel=1e-14)
        # frozen from extended-precision oracles
        assert inverse_mills(10.0) == pytest.approx(7.6945986267064e-23, rel=1e-11)
        assert inverse_mills(-40.0) == pytest.approx(40.024968847207264, rel=1e-8)
        assert inverse_mills(-300.0) == pytest.approx(300.00333325926337, rel=1e-8)

    def test_mills_identity_central_range(self):
        t = np.linspace(-5, 8, 400)
        resid = inverse_mills(t) * norm.cdf(t) - norm.pdf(t)
        assert np.max(np.abs(resid) / np.maximum(norm.pdf(t), 1e-300)) < 1e-10

    def test_mills_monotone_decreasing(self):
        t = np.linspace(-60, 10, 1000)
        assert np.all(np.diff(inverse_mills(t)) < 0)

    def test_mills_branch_seam(self):
        lo = inverse_mills(-5.0 - 1e-12)
        hi = inverse_mills(-5.0 + 1e-12)
        assert lo == pytest.approx(hi, rel=1e-10)
