import math

import numpy as np
import pytest

from bjscc.probability import (
    DistortionMatrix,
    Pmf,
    binary_entropy,
    bsc,
    hamming_distortion,
    uniform,
)
from bjscc.second_order import (
    GaussianMaxSpec,
    SecondOrderQuantities,
    disjoint_condition,
    gaussian_max_cdf,
    gaussian_max_quantile,
    hybrid_condition,
    rate_distortion,
    tilted_information,
)
from conftest import rand_pmf


class TestRateDistortion:
    @pytest.mark.parametrize("D", [0.05, 0.11, 0.25])
    def test_binary_closed_form(self, D):
        sol = rate_distortion(uniform(2), hamming_distortion(2), D)
        assert sol.rate == pytest.approx(1.0 - binary_entropy(D), abs=1e-9)
        assert sol.lambda_star == pytest.approx(math.log2((1 - D) / D), rel=1e-6)
        assert sol.distortion <= D + 1e-9

    def test_lossless_fast_path(self):
        p = Pmf([0.5, 0.25, 0.25])
        sol = rate_distortion(p, hamming_distortion(3), 0.0)
        assert sol.rate == pytest.approx(1.5, abs=1e-12)  # H(W) exactly
        assert math.isinf(sol.lambda_star)
        assert np.array_equal(sol.p_z.probs, p.probs)

    def test_zero_rate_beyond_max_useful_distortion(self):
        sol = rate_distortion(uniform(2), hamming_distortion(2), 0.5)
        assert sol.rate == 0.0 and sol.lambda_star == 0.0

    def test_invalid_range_rejected(self):
        dmat = DistortionMatrix([[0.5, 1.0], [1.0, 0.5]])
        with pytest.raises(ValueError):
            rate_distortion(uniform(2), dmat, 0.2)  # below the per-symbol floor
        with pytest.raises(ValueError):
            rate_distortion(uniform(2), dmat, 0.0)  # no zero-distortion map

    def test_achieved_distortion_meets_constraint(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            p = rand_pmf(rng, 4)
            d = DistortionMatrix(rng.uniform(0, 1, (4, 4)) * (1 - np.eye(4)))
            lo = float(p.probs @ d.d.min(axis=1))
            hi = float((p.probs @ d.d).min())
            D = lo + 0.5 * (hi - lo)
            sol = rate_distortion(p, d, D)
            assert sol.converged
            assert sol.distortion <= D + 1e-9
            assert sol.rate >= 0.0


class TestTiltedInformation:
    def test_lossless_is_self_information(self):
        p = Pmf([0.5, 0.25, 0.25])
        sol = rate_distortion(p, hamming_distortion(3), 0.0)
        j = tilted_information(sol, p, hamming_distortion(3), 0.0)
        assert np.allclose(j, -np.log2(p.probs), atol=1e-12)

    def test_binary_symmetric_constant_vector(self):
        D = 0.11
        sol = rate_distortion(uniform(2), hamming_distortion(2), D)
        j = tilted_information(sol, uniform(2), hamming_distortion(2), D)
        assert j[0] == pytest.approx(j[1], abs=1e-9)
        assert j[0] == pytest.approx(1.0 - binary_entropy(D), abs=1e-6)

    def test_mean_equals_rate(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            p = rand_pmf(rng, 4)
            d = DistortionMatrix(rng.uniform(0, 1, (4, 4)) * (1 - np.eye(4)))
            lo = float(p.probs @ d.d.min(axis=1))
            hi = float((p.probs @ d.d).min())
            D = lo + 0.4 * (hi - lo)
            sol = rate_distortion(p, d, D)
            j = tilted_information(sol, p, d, D)
            assert float(p.probs @ j) == pytest.approx(sol.rate, abs=1e-8)

    def test_zero_varentropy_of_uniform_lossless(self):
        sol = rate_distortion(uniform(4), hamming_distortion(4), 0.0)
        j = tilted_information(sol, uniform(4), hamming_distortion(4), 0.0)
        assert np.var(j) == 0.0


class TestSecondOrderQuantities:
    def test_from_instance_symmetric_channel(self):
        q = SecondOrderQuantities.from_instance(uniform(2), bsc(0.05), uniform(2),
                                                hamming_distortion(2), 0.11)
        assert q.C == pytest.approx(1 - binary_entropy(0.05), abs=1e-12)
        assert q.V_tilde == 0.0
        assert q.calV_D == pytest.approx(0.0, abs=1e-12)
        assert q.R_D == pytest.approx(1 - binary_entropy(0.11), abs=1e-8)


def _random_quantities(rng):
    v = float(rng.uniform(0.1, 2.0))
    v_tilde = float(rng.uniform(0.0, v))
    return SecondOrderQuantities(
        C=float(rng.uniform(0.3, 1.0)), V=v, V_tilde=v_tilde,
        R_D=float(rng.uniform(0.1, 0.8)), calV_D=float(rng.uniform(0.0, 1.0)),
        jmath=np.zeros(2))


class TestDisjointCondition:
    def test_doubling_K_buys_one_bit(self):
        rng = np.random.default_rng(2)
        q = _random_quantities(rng)
        r1 = disjoint_condition(q, 100, 80, 4, 0.01)
        r2 = disjoint_condition(q, 100, 80, 8, 0.01)
        assert r2.slack - r1.slack == pytest.approx(1.0, abs=1e-12)

    def test_degenerate_gaussian(self):
        q = SecondOrderQuantities(C=0.5, V=0.0, V_tilde=0.0, R_D=0.2, calV_D=0.0,
                                  jmath=np.zeros(2))
        n, m, K = 64, 32, 4
        res = disjoint_condition(q, n, m, K, 0.01)
        expected = n * 0.5 - m * 0.2 - (0.5 * math.log2(n) - math.log2(K))
        assert res.slack == pytest.approx(expected, abs=1e-12)

    def test_eps_validation(self):
        rng = np.random.default_rng(3)
        q = _random_quantities(rng)
        with pytest.raises(ValueError):
            disjoint_condition(q, 10, 10, 1, 1.5)
        with pytest.raises(ValueError):
            disjoint_condition(q, 10, 10, 1, 0.01, eta=1.0)  # adjusted below 0

    def test_monotone_in_K_and_eps(self):
        rng = np.random.default_rng(4)
        q = _random_quantities(rng)
        s1 = disjoint_condition(q, 50, 50, 2, 0.01).slack
        s2 = disjoint_condition(q, 50, 50, 4, 0.01).slack
        assert s2 > s1
        s3 = disjoint_condition(q, 50, 50, 2, 0.05).slack
        assert s3 > s1  # larger tolerance, weaker requirement


class TestGaussianMax:
    def test_single_coordinate_closed_form(self):
        from scipy.stats import norm
        spec = GaussianMaxSpec(2.0, 3.0, 1, 40.0)
        for p in (0.05, 0.3, 0.7):
            expected = math.sqrt(5.0 / 40.0) * norm.ppf(p)
            assert gaussian_max_quantile(spec, p) == pytest.approx(expected, abs=1e-10)

    def test_fully_correlated(self):
        from scipy.stats import norm
        spec = GaussianMaxSpec(4.0, 0.0, 5, 16.0)
        assert gaussian_max_quantile(spec, 0.2) == pytest.approx(
            0.5 * norm.ppf(0.2), abs=1e-12)

    def test_independent_pair_quarter_quantile(self):
        spec = GaussianMaxSpec(0.0, 9.0, 2, 9.0)
        assert gaussian_max_quantile(spec, 0.25) == pytest.approx(0.0, abs=1e-12)

    def test_cdf_monotone_and_bounded(self):
        spec = GaussianMaxSpec(1.0, 2.0, 3, 10.0)
        ts = np.linspace(-3, 3, 21)
        vals = [gaussian_max_cdf(spec, t) for t in ts]
        assert all(0.0 <= v <= 1.0 for v in vals)
        assert all(b >= a for a, b in zip(vals, vals[1:]))

    def test_quantile_cdf_roundtrip(self):
        spec = GaussianMaxSpec(1.5, 0.7, 4, 25.0)
        for p in (0.02, 0.2, 0.5, 0.9):
            t = gaussian_max_quantile(spec, p)
            assert gaussian_max_cdf(spec, t) == pytest.approx(p, abs=1e-8)

    def test_cdf_against_monte_carlo(self):
        rng = np.random.default_rng(5)
        spec = GaussianMaxSpec(1.2, 2.5, 6, 30.0)
        a = math.sqrt(spec.sigma1_sq / spec.scale)
        b = math.sqrt(spec.sigma2_sq / spec.scale)
        n = 200_000
        z0 = rng.standard_normal(n)
        zk = rng.standard_normal((n, spec.L))
        samples = (a * z0[:, None] + b * zk).max(axis=1)
        for t in (-0.4, 0.0, 0.3, 0.8):
            f = gaussian_max_cdf(spec, t)
            emp = (samples <= t).mean()
            assert abs(emp - f) <= 3.0 * math.sqrt(f * (1 - f) / n) + 1e-9

    def test_rejects_degenerate(self):
        with pytest.raises(ValueError):
            gaussian_max_quantile(GaussianMaxSpec(0.0, 0.0, 2, 4.0), 0.5)


class TestHybridCondition:
    def test_single_decoder_groups_match_disjoint(self):
        rng = np.random.default_rng(6)
        for _ in range(5):
            q = _random_quantities(rng)
            n, m = int(rng.integers(10, 500)), int(rng.integers(10, 500))
            K = int(rng.choice([1, 2, 8, 64]))
            eps = float(rng.uniform(0.001, 0.3))
            a = hybrid_condition(q, n, m, J=K, L=1, eps=eps)
            b = disjoint_condition(q, n, m, K=K, eps=eps)
            assert a.slack == pytest.approx(b.slack, abs=1e-9)

    def test_more_sharing_weakly_helps_quantile_term(self):
        # the max of more coordinates is stochastically larger, so its lower
        # quantile rises and the subtracted term shrinks the requirement
        rng = np.random.default_rng(7)
        q = _random_quantities(rng)
        n, m, eps = 100, 100, 0.01
        quantiles = []
        for L in (1, 2, 4, 8):
            spec = GaussianMaxSpec(n * q.V_tilde + m * q.calV_D,
                                   n * (q.V - q.V_tilde), L, n + m)
            quantiles.append(gaussian_max_quantile(spec, eps))
        assert all(b >= a - 1e-12 for a, b in zip(quantiles, quantiles[1:]))

    def test_symmetric_channel_source_only_variance(self):
        # with V_tilde = 0 and m = 0 the shared component vanishes entirely
        q = SecondOrderQuantities(C=0.7, V=0.9, V_tilde=0.0, R_D=0.3, calV_D=0.4,
                                  jmath=np.zeros(2))
        res = hybrid_condition(q, 50, 0, J=2, L=2, eps=0.1)
        spec = GaussianMaxSpec(0.0, 50 * 0.9, 2, 50)
        expected = 50 * 0.7 - (0.5 * math.log2(50) - 1.0
                               - math.sqrt(50) * gaussian_max_quantile(spec, 0.1))
        assert res.slack == pytest.approx(expected, abs=1e-12)
