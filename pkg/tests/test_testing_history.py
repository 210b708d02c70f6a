import math

import numpy as np
import pytest
from scipy import stats

from recencysim.quadrature import adaptive_simpson
from recencysim.testing_history import (
    ExponentialInterTest,
    ObservationRule,
    TestingProcess,
    UniformInterTest,
    _residual_from_uniform01,
    observe_most_recent,
    observe_most_recent_many,
    residual_cdf,
    sample_residual,
    swp_conditional_density,
    swp_conditional_survival,
)

EXP1 = TestingProcess(ExponentialInterTest(1.0), ObservationRule.REGULAR)
SWP1 = TestingProcess(ExponentialInterTest(1.0), ObservationRule.STOP_WHEN_POSITIVE)


class TestResidualSampler:
    def test_exponential_mean(self):
        rng = np.random.default_rng(101)
        draws = sample_residual(EXP1, rng, size=1_000_000)
        assert draws.mean() == pytest.approx(1.0, abs=0.01)

    def test_uniform_inverse_cdf_at_one(self):
        law = UniformInterTest(0.0, 3.0)
        assert _residual_from_uniform01(1.0, law) == pytest.approx(3.0)

    def test_uniform_empirical_cdf(self):
        # stationary residual CDF of Uniform[0,4] at x=2 is 0.75
        law = UniformInterTest(0.0, 4.0)
        rng = np.random.default_rng(202)
        proc = TestingProcess(law, ObservationRule.REGULAR)
        draws = sample_residual(proc, rng, size=1_000_000)
        assert np.mean(draws <= 2.0) == pytest.approx(0.75, abs=0.003)

    @pytest.mark.parametrize(
        "law",
        [
            ExponentialInterTest(0.4),
            ExponentialInterTest(2.0),
            UniformInterTest(0.0, 3.0),
            UniformInterTest(0.5, 2.5),
        ],
    )
    def test_ks_against_analytic_cdf(self, law):
        rng = np.random.default_rng(303)
        proc = TestingProcess(law, ObservationRule.REGULAR)
        draws = sample_residual(proc, rng, size=100_000)
        res = stats.kstest(draws, lambda x: residual_cdf(x, law))
        assert res.pvalue > 0.01


class TestObserveMostRecent:
    def test_infection_after_last_test(self):
        rng = np.random.default_rng(1)
        assert observe_most_recent(1.5, 0.5, SWP1, rng) == 1.5

    def test_regular_rule_never_modifies(self):
        rng = np.random.default_rng(2)
        assert observe_most_recent(0.2, 3.0, EXP1, rng) == 0.2

    def test_negative_individual_never_modified(self):
        rng = np.random.default_rng(3)
        assert observe_most_recent(0.2, None, SWP1, rng) == 0.2

    def test_zero_duration_reduces_to_regular(self):
        rng = np.random.default_rng(4)
        assert observe_most_recent(0.7, 0.0, SWP1, rng) == 0.7

    def test_monotone_relation_per_draw(self):
        rng = np.random.default_rng(5)
        n = 20_000
        u = rng.uniform(0, 5, n)
        tid = sample_residual(SWP1, rng, size=n)
        t = observe_most_recent_many(tid, u, np.ones(n, dtype=bool), SWP1, rng)
        stopped = tid < u
        assert np.all(t[stopped] >= tid[stopped])
        assert np.all(t[stopped] <= u[stopped])
        assert np.all(t[~stopped] == tid[~stopped])

    def test_swp_density_chi_square(self):
        # sampled SWP times vs the piecewise conditional density at u=2
        theta, u = 1.0, 2.0
        rng = np.random.default_rng(6)
        n = 1_000_000
        tid = sample_residual(SWP1, rng, size=n)
        t = observe_most_recent_many(
            tid, np.full(n, u), np.ones(n, dtype=bool), SWP1, rng
        )
        edges = np.concatenate([np.linspace(0, 6, 61), [np.inf]])
        observed, _ = np.histogram(t, bins=edges)

        def mass(lo, hi):
            lo_b, hi_b = min(lo, u), min(hi, u)
            below = math.exp(-theta * (u - hi_b)) - math.exp(-theta * (u - lo_b))
            lo_a, hi_a = max(lo, u), max(hi, u)
            above = math.exp(-theta * lo_a) - (
                math.exp(-theta * hi_a) if np.isfinite(hi_a) else 0.0
            )
            return below + above

        expected = n * np.array(
            [mass(edges[i], edges[i + 1]) for i in range(len(edges) - 1)]
        )
        res = stats.chisquare(observed, expected * observed.sum() / expected.sum())
        assert res.pvalue > 0.01

    def test_regular_t_independent_of_u(self):
        rng = np.random.default_rng(7)
        n = 1_000_000
        u = rng.uniform(0, 12.0, n)
        t = sample_residual(EXP1, rng, size=n)
        corr = np.corrcoef(u, t)[0, 1]
        assert abs(corr) < 0.005

    def test_uniform_law_walk_respects_bounds(self):
        proc = TestingProcess(
            UniformInterTest(0.0, 3.0), ObservationRule.STOP_WHEN_POSITIVE
        )
        rng = np.random.default_rng(8)
        n = 50_000
        u = rng.uniform(0, 8, n)
        tid = sample_residual(proc, rng, size=n)
        t = observe_most_recent_many(tid, u, np.ones(n, dtype=bool), proc, rng)
        stopped = tid < u
        assert np.all(t[stopped] >= tid[stopped])
        assert np.all(t[stopped] <= u[stopped])


class TestSwpConditionalDensity:
    def test_left_branch_at_equal_times(self):
        assert swp_conditional_density(1.0, 1.0, 1.0) == pytest.approx(1.0)

    def test_right_branch(self):
        assert swp_conditional_density(2.0, 1.0, 1.0) == pytest.approx(
            math.exp(-2.0), abs=1e-12
        )

    def test_integrates_to_one(self):
        for u, theta in [(0.7, 1.5), (0.0, 1.0), (2.0, 0.4), (5.0, 2.0)]:
            below = adaptive_simpson(
                lambda t: swp_conditional_density(t, u, theta), 0.0, u, tol=1e-12
            )
            # the density jumps at t=u, so start the tail just beyond it
            tail = adaptive_simpson(
                lambda t: swp_conditional_density(t, u, theta),
                float(np.nextafter(u, np.inf)),
                u + 60.0 / theta,
                tol=1e-12,
            )
            assert below + tail == pytest.approx(1.0, abs=1e-8)

    def test_survival_helper_consistent(self):
        for u, theta, c in [(2.0, 1.0, 0.5), (0.3, 2.0, 1.0), (4.0, 0.4, 2.0)]:
            lo = max(c, 0.0)
            num = adaptive_simpson(
                lambda t: swp_conditional_density(t, u, theta),
                lo,
                min(u, 50.0) if u > lo else lo,
                tol=1e-12,
            )
            tail_lo = max(u, c)
            tail = math.exp(-theta * tail_lo)
            assert num + tail == pytest.approx(
                swp_conditional_survival(c, u, theta), abs=1e-8
            )

    def test_input_validation(self):
        with pytest.raises(ValueError):
            swp_conditional_density(1.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            swp_conditional_density(-1.0, 1.0, 1.0)
        with pytest.raises(ValueError):
            swp_conditional_density(1.0, -1.0, 1.0)


class TestLawValidation:
    def test_bad_laws(self):
        with pytest.raises(ValueError):
            ExponentialInterTest(0.0)
        with pytest.raises(ValueError):
            UniformInterTest(2.0, 1.0)
        with pytest.raises(ValueError):
            UniformInterTest(-1.0, 1.0)
