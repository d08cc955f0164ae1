import numpy as np
import pytest

import qrwt
from qrwt import closedforms as cf
from qrwt import estimate, mean_absorption, simulate_once
from qrwt.lumping import doubling_stats

TRIALS = 200_000


class TestSimulateOnce:
    def test_certain_leaf(self, rng):
        assert all(simulate_once(0, 1.0, 1.0, False, rng) == 1 for _ in range(10))

    def test_certain_pair(self, rng):
        assert all(simulate_once(1, 1.0, 1.0, False, rng) == 1 for _ in range(10))

    def test_round_count_distribution(self, rng):
        # p = 1: each round costs one step, rounds are geometric in a
        vals = np.array([simulate_once(1, 1.0, 0.5, False, rng) for _ in range(20_000)])
        se = vals.std() / np.sqrt(len(vals))
        assert vals.mean() == pytest.approx(2.0, abs=5 * se)

    def test_leaf_geometric_mean(self, rng):
        vals = np.array([simulate_once(0, 0.25, 1.0, False, rng) for _ in range(20_000)])
        se = vals.std() / np.sqrt(len(vals))
        assert vals.mean() == pytest.approx(4.0, abs=5 * se)

    def test_bad_args(self, rng):
        with pytest.raises(ValueError):
            simulate_once(-1, 0.5, 0.5, False, rng)
        with pytest.raises(ValueError):
            simulate_once(1, 0.0, 0.5, False, rng)


class TestEstimate:
    def test_reproducible(self):
        a = estimate(2, 0.3, 0.7, trials=5000, seed=123)
        b = estimate(2, 0.3, 0.7, trials=5000, seed=123)
        assert a.mean == b.mean and a.variance == b.variance
        assert np.array_equal(a.hist_steps, b.hist_steps)
        assert np.array_equal(a.hist_counts, b.hist_counts)
        c = estimate(2, 0.3, 0.7, trials=5000, seed=124)
        assert c.mean != a.mean

    def test_histogram_totals(self):
        est = estimate(1, 0.5, 0.5, trials=TRIALS, seed=5)
        assert est.hist_counts.sum() == TRIALS
        assert np.all(est.hist_steps >= 1)
        mean_from_hist = (est.hist_steps * est.hist_counts).sum() / TRIALS
        assert mean_from_hist == pytest.approx(est.mean, rel=1e-12)

    def test_two_segment_mean(self):
        est = estimate(1, 0.5, 0.5, trials=TRIALS, seed=42)
        assert abs(est.mean - 16 / 3) < 4 * est.stderr

    def test_four_segment_mean(self):
        est = estimate(2, 0.5, 0.5, trials=TRIALS, seed=7)
        exact = cf.small_repeater_mean("doubling4", 0.5, 0.5)
        assert abs(est.mean - exact) < 4 * est.stderr

    def test_variance_matches_solver(self):
        est = estimate(2, 0.4, 0.6, trials=400_000, seed=9)
        exact = doubling_stats(2, 0.4, 0.6)
        # sampling error of the variance itself is ~ var * sqrt(2/(n-1)) for
        # light tails; allow a generous multiple for the heavy tail
        rel = abs(est.variance / exact.variance - 1)
        assert rel < 0.05

    def test_restart_counting(self):
        for a in (0.4, 0.8):
            est = estimate(1, 0.6, a, trials=TRIALS, seed=21)
            se = np.sqrt(est.restarts_mean / TRIALS) * 3  # loose bound
            assert est.restarts_mean == pytest.approx((1 - a) / a, abs=5 * max(se, 1e-3))

    def test_mixed_moment_two_segments(self):
        p, a = 0.5, 0.5
        est = estimate(1, p, a, trials=800_000, seed=33)
        closed = 2 * (1 - a) * (3 - 2 * p) / (a**2 * (2 - p) * p)
        assert est.steps_restarts_mean == pytest.approx(closed, rel=0.03)

    def test_cc_agrees_with_chain(self):
        est = estimate(1, 0.4, 0.6, cc=True, trials=TRIALS, seed=11)
        exact = mean_absorption(qrwt.doubling_with_cc(1, 0.4, 0.6))[0]
        assert abs(est.mean - exact) < 4 * est.stderr

    def test_matches_literal_recursion(self, rng):
        # the kernel and the plain-python recursion sample the same law
        est = estimate(2, 0.45, 0.55, trials=100_000, seed=3)
        vals = np.array([simulate_once(2, 0.45, 0.55, False, rng) for _ in range(20_000)])
        se = np.sqrt(vals.var() / len(vals) + est.stderr**2)
        assert vals.mean() == pytest.approx(est.mean, abs=5 * se)

    def test_bad_args(self):
        with pytest.raises(ValueError):
            estimate(1, 0.5, 0.5, trials=0)
        with pytest.raises(ValueError):
            estimate(1, 1.5, 0.5)
