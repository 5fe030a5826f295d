import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import special

from pmgpc.estimators import (
    LogMarginalEstimate,
    TemperatureSchedule,
    ais_estimate,
    geometric_schedule,
    is_estimate,
    logsumexp,
    n_levels,
)
from pmgpc.harness.oracle import quadrature_marginal
from pmgpc.kernel import Hyperparams, gram
from pmgpc.laplace import laplace_approx
from pmgpc.model import Dataset


@pytest.fixture
def small_problem(rng):
    X = rng.uniform(size=(12, 2))
    y = np.where(X[:, 0] + 0.3 * rng.normal(size=12) > 0.5, 1.0, -1.0)
    G = gram(X, Hyperparams.from_natural(5.0, [0.4]))
    return y, G, laplace_approx(y, G)


class TestSchedule:
    def test_tiny(self):
        assert geometric_schedule(2).betas == (1.0, 1e-6, 0.0)
        assert geometric_schedule(4).betas == (1.0, 1e-6, 0.0)
        assert geometric_schedule(1).betas == (1.0, 1e-6, 0.0)

    def test_hundred(self):
        b = np.array(geometric_schedule(100).betas)
        assert b.size == 11
        assert b[4] == pytest.approx(0.2, rel=1e-15)
        assert b[9] == pytest.approx(1e-6, rel=1e-12)
        # uniform log spacing inside each block
        np.testing.assert_allclose(np.diff(np.log(b[:5])), np.log(0.2) / 4, rtol=1e-12)
        np.testing.assert_allclose(np.diff(np.log(b[4:10])), np.log(5e-6) / 5, rtol=1e-12)

    @pytest.mark.parametrize("n,s", [(1, 2), (2, 2), (5, 4), (9, 4), (10, 4), (50, 8), (500, 24), (1000, 32)])
    def test_levels(self, n, s):
        assert n_levels(n) == s

    @given(st.integers(1, 5000))
    def test_invariants(self, n):
        sched = geometric_schedule(n)
        b = np.array(sched.betas)
        s = math.ceil(math.sqrt(n))
        s += s % 2
        assert len(sched) == sched.s + 1 == s + 1
        assert b[0] == 1.0 and b[-1] == 0.0
        assert np.all(np.diff(b) < 0)
        if s >= 4:
            assert b[s // 2 - 1] == pytest.approx(0.2, rel=1e-15)
        assert b[-2] == pytest.approx(1e-6, rel=1e-12)

    @pytest.mark.parametrize("betas", [(1.0,), (0.9, 0.0), (1.0, 0.5, 0.5, 0.0), (1.0, 0.2)])
    def test_rejects_invalid(self, betas):
        with pytest.raises(ValueError):
            TemperatureSchedule(betas)


class TestLogsumexp:
    def test_examples(self):
        assert logsumexp([0.0, 0.0]) == pytest.approx(math.log(2))
        assert logsumexp([-1000.0, -1000.0]) == pytest.approx(-1000 + math.log(2), rel=1e-15)
        assert logsumexp([0.0, -np.inf]) == 0.0
        assert logsumexp([-np.inf, -np.inf]) == -np.inf

    def test_empty(self):
        with pytest.raises(ValueError):
            logsumexp([])

    @given(st.lists(st.floats(-700, 700), min_size=1, max_size=20), st.floats(-1e3, 1e3))
    def test_matches_scipy_and_shifts(self, v, c):
        a = np.array(v)
        assert logsumexp(a) == pytest.approx(special.logsumexp(a), rel=1e-12, abs=1e-12)
        assert logsumexp(a + c) == pytest.approx(logsumexp(a) + c, rel=1e-12, abs=1e-9)
        assert logsumexp(a) >= a.max()

    def test_estimate_invariant(self):
        lw = np.array([-3.0, -1.5, -2.2, -7.0])
        est = LogMarginalEstimate.from_log_weights(lw, "is")
        assert est.log_value == logsumexp(lw) - math.log(4)
        assert est.n_imp == 4


class TestIdentities:
    def test_two_level_ais_is_importance_sampling(self, small_problem):
        y, G, la = small_problem
        a = ais_estimate(y, G, "approx", schedule=(1.0, 0.0), n_imp=7, rng=np.random.default_rng(3), la=la)
        b = is_estimate(y, G, la, 7, np.random.default_rng(3))
        np.testing.assert_array_equal(a.log_weights, b.log_weights)
        assert a.log_value == b.log_value

    def test_frozen_transitions_telescope(self, small_problem):
        y, G, la = small_problem
        b = is_estimate(y, G, la, 5, np.random.default_rng(8))
        a = ais_estimate(y, G, "approx", schedule=geometric_schedule(200), n_imp=5,
                         ess_steps_per_level=0, rng=np.random.default_rng(8), la=la)
        np.testing.assert_allclose(a.log_weights, b.log_weights, rtol=1e-13, atol=1e-12)

    def test_trajectory_streams_are_prefix_stable(self, small_problem):
        y, G, la = small_problem
        few = ais_estimate(y, G, "approx", n_imp=3, rng=np.random.default_rng(21), la=la)
        many = ais_estimate(y, G, "approx", n_imp=8, rng=np.random.default_rng(21), la=la)
        np.testing.assert_array_equal(few.log_weights, many.log_weights[:3])

    def test_seeded_reproducibility(self, small_problem):
        y, G, la = small_problem
        runs = [ais_estimate(y, G, "prior", n_imp=4, rng=np.random.default_rng(5)) for _ in range(2)]
        np.testing.assert_array_equal(runs[0].log_weights, runs[1].log_weights)

    def test_needs_converged_laplace(self, small_problem):
        y, G, _ = small_problem
        bad = laplace_approx(y, G, max_iter=0)
        with pytest.raises(ValueError):
            is_estimate(y, G, bad, 1, np.random.default_rng(0))
        with pytest.raises(ValueError):
            ais_estimate(y, G, "approx", la=bad, rng=np.random.default_rng(0))
        with pytest.raises(ValueError):
            ais_estimate(y, G, "sideways", rng=np.random.default_rng(0))


class TestUnbiasedness:
    """Unit-variance toy, where the importance weights have finite variance."""

    R = 4000

    @staticmethod
    @pytest.fixture(scope="class")
    def mild():
        X = np.array([[-1.0, -1.0], [1.0, 1.0]])
        data = Dataset(X, np.array([1.0, -1.0]))
        G = gram(X, Hyperparams.from_natural(1.0, [1.0]))
        return data, G, laplace_approx(data.y, G), quadrature_marginal(data, G)

    def _mean_and_se(self, logs):
        w = np.exp(np.asarray(logs))
        return w.mean(), w.std(ddof=1) / math.sqrt(w.size)

    def test_is(self, mild):
        data, G, la, z = mild
        streams = np.random.default_rng(101).spawn(self.R)
        m, se = self._mean_and_se([is_estimate(data.y, G, la, 1, r).log_value for r in streams])
        assert abs(m - z) < 4 * se

    @pytest.mark.parametrize("start", ["prior", "approx"])
    def test_ais(self, mild, start):
        data, G, la, z = mild
        streams = np.random.default_rng(102).spawn(self.R)
        sched = TemperatureSchedule((1.0, 0.5, 0.1, 0.0))
        m, se = self._mean_and_se(
            [ais_estimate(data.y, G, start, schedule=sched, rng=r, la=la).log_value for r in streams])
        assert abs(m - z) < 4 * se
