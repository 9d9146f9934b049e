"""Truncated-exponential norms: exact, enumerated, Monte Carlo, and ratios."""

import time

import numpy as np
import pytest
from scipy import stats

from _oracles import enumerate_norm_sq, likelihood_ratio_rademacher
from swrl import (
    INF_DEGREE,
    DegenerateDenominator,
    NormOverflow,
    exp_trunc,
    ldr_norm_enumerate_rademacher,
    ldr_norm_exact_rademacher,
    ldr_norm_limit,
    ldr_norm_mc,
    overlap_statistic_value,
    overlap_statistics,
    overlap_tail_decay_rademacher,
    rademacher,
    ratio_estimate,
    sample_goe,
    sample_overlap_statistic,
    sample_spiked,
    sample_vector,
    sparse_rademacher,
    val_closed_form,
)


class TestExpTrunc:
    def test_degree_zero(self):
        assert exp_trunc(5.0, 0) == 1.0

    def test_degree_two(self):
        assert exp_trunc(1.0, 2) == 2.5

    def test_infinite_degree_is_exp(self):
        z = np.linspace(0, 20, 7)
        np.testing.assert_allclose(exp_trunc(z, INF_DEGREE), np.exp(z))

    def test_monotone_in_degree_and_below_exp(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            z = float(rng.uniform(0, 10))
            degrees = np.sort(rng.integers(0, 40, size=4))
            vals = [exp_trunc(z, int(d)) for d in degrees]
            assert all(a <= b + 1e-12 for a, b in zip(vals, vals[1:]))
            assert vals[-1] <= np.exp(z) + 1e-12

    def test_rejects_negative_input(self):
        with pytest.raises(ValueError):
            exp_trunc(-1.0, 3)
        with pytest.raises(ValueError):
            exp_trunc(1.0, -1)
        with pytest.raises(ValueError):
            exp_trunc(1.0, 2.5)


class TestOverlapStatistic:
    def test_equal_spikes_hit_maximum(self):
        x = sample_vector(rademacher(), 64, np.random.default_rng(3))
        assert overlap_statistic_value(x, x, 0.6) == pytest.approx(
            0.36 * 64 / 2.0, rel=1e-12
        )

    def test_zero_spike_convention(self):
        assert overlap_statistic_value(np.zeros(8), np.ones(8), 0.6) == 0.0

    def test_range_bounds(self):
        for prior in (rademacher(), sparse_rademacher(0.25)):
            for i in range(300):
                a = sample_overlap_statistic(prior, 40, 0.6, np.random.default_rng((4, i)))
                assert 0.0 <= a <= 0.36 * 40 / 2.0 + 1e-12

    def test_distribution_approaches_scaled_chi_square(self):
        # small-scale version; the full n=2000 / 1e5-draw check is acceptance
        lam, n = 0.6, 500
        draws = overlap_statistics(rademacher(), n, lam, 20000, 314)
        ks = stats.kstest(draws, lambda a: stats.chi2(1).cdf(2.0 * a / lam**2))
        assert ks.statistic < 0.05


class TestExactRademacher:
    def test_reference_values(self):
        assert ldr_norm_exact_rademacher(2, 0.5, INF_DEGREE).value == pytest.approx(
            0.5 + 0.5 * np.exp(0.25), abs=1e-12
        )
        assert ldr_norm_exact_rademacher(2, 0.5, 1).value == pytest.approx(1.125, abs=1e-12)

    def test_matches_brute_force_enumeration(self):
        for n in (2, 3, 4):
            for lam in (0.3, 0.5, 0.8):
                for degree in (1, 2, INF_DEGREE):
                    fast = ldr_norm_exact_rademacher(n, lam, degree).value
                    brute = ldr_norm_enumerate_rademacher(n, lam, degree).value
                    assert fast == pytest.approx(brute, abs=1e-12)

    def test_matches_generic_prior_enumeration(self):
        prior = rademacher()
        for n, lam, degree in ((2, 0.5, INF_DEGREE), (3, 0.7, 2)):
            oracle = enumerate_norm_sq(prior.values, prior.probs, n, lam, degree)
            assert ldr_norm_exact_rademacher(n, lam, degree).value == pytest.approx(
                oracle, abs=1e-12
            )

    def test_limit_at_moderate_size(self):
        start = time.perf_counter()
        est = ldr_norm_exact_rademacher(4000, 0.5, INF_DEGREE)
        assert time.perf_counter() - start < 5.0
        assert abs(est.value - ldr_norm_limit(0.5) ** 2) / ldr_norm_limit(0.5) ** 2 < 0.02
        assert est.stderr == 0.0
        assert est.method == "binomial_sum"

    def test_monotone_in_degree_and_snr(self):
        rng = np.random.default_rng(8)
        for _ in range(100):
            n = int(rng.integers(2, 400))
            lam = float(rng.uniform(0.05, 0.95))
            d1, d2 = np.sort(rng.integers(0, 30, size=2))
            lam2 = min(lam + float(rng.uniform(0.01, 0.3)), 0.99)
            v_d1 = ldr_norm_exact_rademacher(n, lam, int(d1)).value
            v_d2 = ldr_norm_exact_rademacher(n, lam, int(d2)).value
            v_l2 = ldr_norm_exact_rademacher(n, lam2, int(d2)).value
            assert v_d1 <= v_d2 + 1e-12
            assert v_d2 <= v_l2 + 1e-12

    def test_jensen_lower_bound(self):
        for n, lam, degree in ((10, 0.2, 3), (100, 0.6, INF_DEGREE), (50, 0.9, 1)):
            assert ldr_norm_exact_rademacher(n, lam, degree).value >= 1.0

    def test_overflow_reported_not_wrapped(self):
        with pytest.raises(NormOverflow):
            ldr_norm_exact_rademacher(2000, 3.0, INF_DEGREE)


class TestMonteCarlo:
    def test_matches_enumeration_small(self):
        est = ldr_norm_mc(rademacher(), 2, 0.5, INF_DEGREE, 100_000, 42)
        target = ldr_norm_enumerate_rademacher(2, 0.5, INF_DEGREE).value
        assert abs(est.value - target) <= 3.0 * est.stderr
        assert est.value >= 1.0 - 3.0 * est.stderr

    def test_matches_exact_at_scale(self):
        est = ldr_norm_mc(rademacher(), 2000, 0.5, 20, 20_000, 43)
        target = ldr_norm_exact_rademacher(2000, 0.5, 20).value
        assert abs(est.value - target) <= 3.0 * est.stderr

    def test_sparse_prior_against_test_oracle(self):
        prior = sparse_rademacher(0.5)
        est = ldr_norm_mc(prior, 3, 0.6, 2, 60_000, 44)
        oracle = enumerate_norm_sq(prior.values, prior.probs, 3, 0.6, 2)
        assert abs(est.value - oracle) <= 3.0 * est.stderr

    def test_tiny_snr_estimate_is_one(self):
        est = ldr_norm_mc(rademacher(), 16, 1e-6, INF_DEGREE, 2000, 45)
        assert est.value == pytest.approx(1.0, abs=1e-9)

    def test_trials_floor(self):
        with pytest.raises(ValueError):
            ldr_norm_mc(rademacher(), 4, 0.5, 1, 999, 0)


class TestLimit:
    def test_values(self):
        assert ldr_norm_limit(0.0) == 1.0
        assert ldr_norm_limit(0.9) == pytest.approx(1.5146, abs=1e-4)

    def test_coincides_with_curve_value(self):
        for lam in np.linspace(0.0, 0.99, 34):
            assert ldr_norm_limit(float(lam)) == val_closed_form(float(lam))


class TestRatioEstimate:
    def test_constant_function(self):
        est = ratio_estimate(np.ones(50), np.ones(80))
        assert (est.value, est.stderr) == (1.0, 0.0)

    def test_scale_invariance(self):
        est = ratio_estimate(np.full(50, 7.5), np.full(80, 7.5))
        assert est.value == pytest.approx(1.0)
        assert est.stderr == 0.0

    def test_degenerate_denominator(self):
        with pytest.raises(DegenerateDenominator):
            ratio_estimate(np.ones(10), np.zeros(10))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            ratio_estimate(np.array([]), np.ones(3))

    def test_likelihood_ratio_surrogate_attains_norm(self):
        """Feeding the exact density ratio as f makes the ratio equal the
        exact norm (supremum case), up to Monte Carlo error."""
        lam, n, trials = 0.5, 2, 4000
        f_alt = np.empty(trials)
        f_null = np.empty(trials)
        for i in range(trials):
            rng = np.random.default_rng((2027, i))
            f_alt[i] = likelihood_ratio_rademacher(
                sample_spiked(rademacher(), lam, n, rng).y, lam
            )
            f_null[i] = likelihood_ratio_rademacher(sample_goe(n, np.random.default_rng((2028, i))), lam)
        est = ratio_estimate(f_alt, f_null)
        target = np.sqrt(ldr_norm_enumerate_rademacher(n, lam, INF_DEGREE).value)
        assert abs(est.value - target) <= 3.0 * est.stderr


class TestTailDecay:
    def test_subgaussian_rate_with_slack(self):
        fit = overlap_tail_decay_rademacher(2000, np.linspace(0.05, 0.3, 11))
        assert fit.rate >= 0.8
        assert np.all(np.isfinite(fit.log_probs))
        # with the slack rate 0.8, the fitted offset stays modest
        log_c = np.max(fit.log_probs + 0.8 * 2000 * fit.u_grid**2 / 2.0)
        assert log_c < 10.0
