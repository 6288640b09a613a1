import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cr_similarity.model import GroupSample, SufficientStats, expected_events, mle, sufficient_stats
from cr_similarity.similarity import (EXPONENTIAL, ConfigurationError, TestConfig,
                                      _bootstrap_p_value, _order_statistic, apply_censoring,
                                      estimate_censor_rate, run_similarity_test, simulate_group,
                                      simulate_stats, state_test, threshold_grid)
from oracles import cause_probability_discrete, exact_cause_probability

S1_ALPHA = (0.001, 0.0011, 0.0004)


class TestSimulateGroup:
    def test_zero_hazard(self):
        sample = simulate_group([0, 0, 0], 50, 90.0, np.random.default_rng(1))
        assert np.all(sample.outcomes == 0)
        assert np.all(sample.exit_times == 90.0)

    def test_exact_probability_matches_discrete_oracle(self):
        exact = exact_cause_probability(S1_ALPHA, 90)
        discrete = cause_probability_discrete(S1_ALPHA, 90, step=0.01)
        np.testing.assert_allclose(exact, discrete, rtol=1e-4)
        assert exact[0] == pytest.approx(0.0806, abs=5e-5)

    def test_cause_fractions(self):
        n = 100_000
        sample = simulate_group(S1_ALPHA, n, 90.0, np.random.default_rng(2024))
        target = exact_cause_probability(S1_ALPHA, 90)
        observed = np.bincount(sample.outcomes, minlength=4)[1:] / n
        se = np.sqrt(target * (1 - target) / n)
        assert np.all(np.abs(observed - target) < 3 * se)

    def test_expected_events_rule_of_thumb(self):
        rng = np.random.default_rng(5)
        reps = 2000
        events = [sufficient_stats(simulate_group([0.001], 213, 90.0, rng)).counts[0]
                  for _ in range(reps)]
        mean = np.mean(events)
        exact = 213 * (1 - math.exp(-0.09))
        assert abs(mean - exact) < 3 * np.std(events) / math.sqrt(reps)
        assert mean == pytest.approx(expected_events(0.001, 90, 213), rel=0.05)

    def test_deterministic(self):
        a = simulate_group(S1_ALPHA, 300, 90.0, np.random.default_rng(9))
        b = simulate_group(S1_ALPHA, 300, 90.0, np.random.default_rng(9))
        np.testing.assert_array_equal(a.exit_times, b.exit_times)
        np.testing.assert_array_equal(a.outcomes, b.outcomes)

    def test_zero_intensity_state_never_entered(self):
        sample = simulate_group([0.003, 0.0, 0.002, 0.0], 20_000, 90.0,
                                np.random.default_rng(3))
        counts = sufficient_stats(sample).counts
        assert counts[1] == 0 and counts[3] == 0
        assert counts[0] > 0 and counts[2] > 0

    def test_invalid(self):
        with pytest.raises(ValueError):
            simulate_group([-0.1], 10, 90.0, np.random.default_rng(0))
        with pytest.raises(ValueError):
            simulate_group([0.1], 0, 90.0, np.random.default_rng(0))


class TestSimulateStats:
    def test_single_row_matches_simulate_group(self):
        counts, exposure = simulate_stats(S1_ALPHA, 400, 90.0, np.random.default_rng(4), 1)
        stats = sufficient_stats(simulate_group(S1_ALPHA, 400, 90.0, np.random.default_rng(4)))
        np.testing.assert_array_equal(counts[0], stats.counts)
        assert exposure[0] == pytest.approx(stats.exposure, rel=1e-13)

    @pytest.mark.parametrize("censor_rate", [0.0, 0.004])
    def test_moments(self, censor_rate):
        alpha, n, tau, size = np.array(S1_ALPHA), 300, 90.0, 4000
        counts, exposure = simulate_stats(alpha, n, tau, np.random.default_rng(8), size,
                                          censor_rate)
        h = alpha.sum() + censor_rate
        p_exit = 1 - math.exp(-h * tau)
        mean_counts = n * alpha / h * p_exit
        mean_exposure = n * p_exit / h
        assert np.all(np.abs(counts.mean(axis=0) - mean_counts)
                      < 4 * counts.std(axis=0) / math.sqrt(size))
        assert abs(exposure.mean() - mean_exposure) < 4 * exposure.std() / math.sqrt(size)

    def test_block_size_independent_of_workers(self):
        a = simulate_stats(S1_ALPHA, 50, 90.0, np.random.default_rng(1), 600)
        b = simulate_stats(S1_ALPHA, 50, 90.0, np.random.default_rng(1), 600)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])


class TestCensoring:
    def test_rate_zero_is_identity(self):
        sample = simulate_group(S1_ALPHA, 100, 90.0, np.random.default_rng(0))
        assert apply_censoring(sample, 0.0, np.random.default_rng(1)) is sample

    def test_huge_rate_censors_everything(self):
        sample = simulate_group(S1_ALPHA, 1000, 90.0, np.random.default_rng(0))
        censored = apply_censoring(sample, 1e3, np.random.default_rng(1))
        assert sufficient_stats(censored).counts.sum() == 0
        assert censored.exit_times.max() < 0.05

    def test_mle_consistent_under_censoring(self):
        rng = np.random.default_rng(77)
        estimates = []
        for _ in range(200):
            sample = simulate_group([0.01], 10_000, 90.0, rng)
            sample = apply_censoring(sample, 0.01, rng)
            estimates.append(mle(sufficient_stats(sample))[0])
        assert np.mean(estimates) == pytest.approx(0.01, rel=0.02)

    def test_estimate_no_random_censoring(self):
        sample = simulate_group(S1_ALPHA, 200, 90.0, np.random.default_rng(0))
        assert estimate_censor_rate(sample) == 0.0

    def test_estimate_division(self):
        stats = SufficientStats([3], 10000, 100, 90.0, n_random_censored=5)
        assert estimate_censor_rate(stats) == 0.0005

    def test_estimate_recovers_rate(self):
        rng = np.random.default_rng(21)
        sample = apply_censoring(simulate_group(S1_ALPHA, 10_000, 90.0, rng), 0.002, rng)
        assert estimate_censor_rate(sample) == pytest.approx(0.002, rel=0.10)

    def test_estimate_zero_exposure(self):
        with pytest.raises(ValueError):
            estimate_censor_rate(SufficientStats([0], 0.0, 0, 90.0))


class TestPValue:
    def test_all_bootstrap_above(self):
        assert _bootstrap_p_value(0.1, np.array([0.2, 0.3, 0.5])) == 0.0

    def test_observed_at_or_above_max(self):
        assert _bootstrap_p_value(0.5, np.array([0.2, 0.3, 0.5])) == 1.0

    def test_ties_count(self):
        assert _bootstrap_p_value(0.3, np.array([0.1, 0.3, 0.3, 0.9])) == 0.75

    def test_order_statistic(self):
        boot = np.arange(1, 1001) / 1000
        assert _order_statistic(boot, 0.05) == 0.05
        assert _order_statistic(np.arange(10.0), 0.05) == -math.inf

    def test_identical_groups_wide_margin(self):
        s = SufficientStats([18, 17, 6], 16800, 213, 90.0)
        config = TestConfig((0.01, 0.01, 0.01), n_boot=1000, seed=3)
        p, q, boot = state_test(s, s, 1, config, np.random.default_rng(3))
        assert p < 0.05
        assert boot.size == 1000 and np.all(np.diff(boot) >= 0)
        assert q == boot[49]
        # bootstrap distances cluster around the margin
        assert abs(np.median(boot) - 0.01) < 0.002


def small_stats(draw_counts, exposure, n=400):
    return SufficientStats(draw_counts, exposure, n, 90.0)


class TestRunSimilarityTest:
    s1 = SufficientStats([17, 18, 6], 16800, 213, 90.0)
    s2 = SufficientStats([29, 60, 31], 36000, 482, 90.0)

    def test_deterministic(self):
        config = TestConfig((0.001, 0.001, 0.001), n_boot=300, seed=99)
        a = run_similarity_test(self.s1, self.s2, config)
        b = run_similarity_test(self.s1, self.s2, config)
        assert a.to_dict() == b.to_dict()

    def test_workers_do_not_change_result(self):
        config = TestConfig((0.0008, 0.0012, 0.001), n_boot=300, seed=5)
        a = run_similarity_test(self.s1, self.s2, config, workers=1)
        b = run_similarity_test(self.s1, self.s2, config, workers=3)
        assert a.to_dict() == b.to_dict()

    def test_group_samples_and_stats_agree(self):
        rng = np.random.default_rng(0)
        g1 = simulate_group(S1_ALPHA, 250, 90.0, rng)
        g2 = simulate_group((0.0008, 0.0017, 0.0009), 300, 90.0, rng)
        config = TestConfig((0.001,) * 3, n_boot=200, seed=1)
        a = run_similarity_test(g1, g2, config)
        b = run_similarity_test(sufficient_stats(g1), sufficient_stats(g2), config)
        assert a.to_dict() == b.to_dict()

    def test_single_state(self):
        s1 = SufficientStats([20], 18000, 200, 90.0)
        s2 = SufficientStats([22], 17900, 200, 90.0)
        r = run_similarity_test(s1, s2, TestConfig((0.002,), n_boot=500, seed=2))
        assert r.global_reject == bool(r.per_state_reject[0])
        assert r.global_reject

    def test_mismatched_states(self):
        with pytest.raises(ConfigurationError):
            run_similarity_test(self.s1, self.s2, TestConfig((0.001, 0.001)))

    def test_mismatched_tau(self):
        other = SufficientStats([29, 60, 31], 36000, 482, 60.0)
        with pytest.raises(ConfigurationError):
            run_similarity_test(self.s1, other, TestConfig((0.001,) * 3))

    def test_random_censoring_needs_mode(self):
        censored = SufficientStats([29, 60, 31], 36000, 482, 90.0, n_random_censored=4)
        with pytest.raises(ConfigurationError):
            run_similarity_test(self.s1, censored, TestConfig((0.001,) * 3))
        r = run_similarity_test(self.s1, censored,
                                TestConfig((0.001,) * 3, n_boot=100, censoring_mode=EXPONENTIAL))
        assert r.p_values.shape == (3,)

    def test_invalid_config(self):
        with pytest.raises(ConfigurationError):
            TestConfig((0.001, 0.0))
        with pytest.raises(ConfigurationError):
            TestConfig((0.001,), level=1.0)
        with pytest.raises(ConfigurationError):
            TestConfig((0.001,), n_boot=0)

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.integers(0, 40), min_size=2, max_size=2),
           st.lists(st.integers(0, 40), min_size=2, max_size=2),
           st.floats(8000, 20000), st.floats(8000, 20000),
           st.lists(st.floats(1e-4, 3e-3), min_size=2, max_size=2),
           st.integers(0, 2 ** 63))
    def test_iut_consistency(self, c1, c2, e1, e2, deltas, seed):
        r = run_similarity_test(small_stats(c1, e1), small_stats(c2, e2),
                                TestConfig(tuple(deltas), n_boot=60, seed=seed))
        assert r.global_reject == bool(np.all(r.per_state_reject))
        assert r.global_reject == bool(r.p_values.max() < 0.05)
        np.testing.assert_array_equal(r.per_state_reject, r.p_values < 0.05)
        assert np.all((0 <= r.p_values) & (r.p_values <= 1))

    def test_p_value_decreases_with_margin(self):
        # common random numbers couple the thresholds; |difference| makes the
        # coupling monotone only up to Monte Carlo noise
        grid = [(d,) * 3 for d in np.linspace(0.0002, 0.002, 19)]
        b = 400
        results = threshold_grid(self.s1, self.s2, grid, TestConfig(grid[0], n_boot=b, seed=4))
        p = np.array([r.p_values for r in results])
        assert np.all(np.diff(p, axis=0) <= 1 / math.sqrt(b))
        assert np.all(p[-1] <= p[0])
        assert np.all(p[-1] < 0.01)


@pytest.mark.slow
def test_level_at_margin():
    """Data generated exactly at the margin rejects about 5% of the time."""
    from cr_similarity._rng import substream

    n_sim, b = 2000, 500
    alpha1, alpha2, delta = (0.0012,), (0.0017,), 0.0005
    rejections = 0
    for r in range(n_sim):
        rng = substream(2024, r)
        g1 = simulate_group(alpha1, 300, 90.0, rng)
        g2 = simulate_group(alpha2, 300, 90.0, rng)
        res = run_similarity_test(g1, g2, TestConfig((delta,), n_boot=b, seed=r))
        rejections += bool(res.global_reject)
    rate = rejections / n_sim
    assert abs(rate - 0.05) <= 0.02, rate
