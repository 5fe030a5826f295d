import numpy as np
import pytest
from scipy import stats

from pmgpc.laplace import GaussianRef
from pmgpc.model import log_ndtr
from pmgpc.slice_sampling import TemperedTarget, ess_batch, ess_step


def _run(target, F, n_steps, seed):
    streams = np.random.default_rng(seed).spawn(F.shape[1])
    delta = target.delta(F)
    for _ in range(n_steps):
        F, delta, _ = ess_batch(F, delta, target, streams)
    return F


class TestEllipticalSlice:
    def test_probit_posterior_mean(self):
        # prior N(0, 1) times Phi(f): mean sqrt(2/pi) / sqrt(2)
        ref = GaussianRef(np.zeros(1), np.eye(1))
        target = TemperedTarget(ref, lambda F: log_ndtr(F[0]))
        F = _run(target, np.zeros((1, 4000)), 30, seed=1)
        expected = np.sqrt(2 / np.pi) / np.sqrt(2.0)
        assert F.mean() == pytest.approx(expected, abs=0.04)

    def test_off_centre_reference(self):
        # ellipse around N(1, 1) with a residual that turns it into N(0, 1)
        ref = GaussianRef(np.array([1.0]), np.eye(1))
        delta = lambda F: stats.norm.logpdf(F[0]) - stats.norm.logpdf(F[0], loc=1.0)  # noqa: E731
        F = _run(TemperedTarget(ref, delta), np.full((1, 3000), 1.0), 100, seed=2)
        assert F.mean() == pytest.approx(0.0, abs=0.05)
        assert F.var() == pytest.approx(1.0, abs=0.07)
        assert stats.kstest(F[0], "norm").pvalue > 1e-3

    def test_zero_temperature_keeps_reference(self, rng):
        S = np.array([[1.0, 0.8], [0.8, 1.0]])
        ref = GaussianRef(np.array([1.0, -1.0]), np.linalg.cholesky(S))
        target = TemperedTarget(ref, lambda F: np.full(F.shape[1], -np.inf), beta=0.0)
        F = _run(target, ref.sample(rng, size=20000), 3, seed=3)
        np.testing.assert_allclose(F.mean(axis=1), [1.0, -1.0], atol=0.03)
        np.testing.assert_allclose(np.cov(F), S, atol=0.04)

    def test_columns_independent_of_grouping(self, rng):
        ref = GaussianRef(np.zeros(3), np.eye(3) * 2.0)
        y = np.array([1.0, -1.0, 1.0])
        target = TemperedTarget(ref, lambda F: np.sum(log_ndtr(y[:, None] * F), axis=0), beta=0.7)
        F0 = rng.normal(size=(3, 5))
        d0 = target.delta(F0)
        together, _, _ = ess_batch(F0, d0, target, np.random.default_rng(9).spawn(5))
        streams = np.random.default_rng(9).spawn(5)
        for j in range(5):
            single, _, _ = ess_batch(F0[:, [j]], d0[[j]], target, [streams[j]])
            np.testing.assert_array_equal(single[:, 0], together[:, j])

    def test_stall_leaves_state(self):
        start = np.array([[0.3]])
        ref = GaussianRef(np.zeros(1), np.eye(1))
        target = TemperedTarget(ref, lambda F: np.where(F[0] == 0.3, 0.0, -np.inf))
        F, delta, stalls = ess_batch(start, np.zeros(1), target, [np.random.default_rng(0)])
        assert stalls == 1
        np.testing.assert_array_equal(F, start)
        np.testing.assert_array_equal(delta, [0.0])

    def test_returns_delta_of_new_state(self, rng):
        ref = GaussianRef(np.zeros(2), np.eye(2))
        target = TemperedTarget(ref, lambda F: log_ndtr(F[0]) + log_ndtr(-F[1]))
        F0 = rng.normal(size=(2, 6))
        F, delta, _ = ess_batch(F0, target.delta(F0), target, rng.spawn(6))
        np.testing.assert_allclose(delta, target.delta(F))

    def test_single_step_wrapper(self):
        ref = GaussianRef(np.zeros(1), np.eye(1))
        target = TemperedTarget(ref, lambda F: log_ndtr(F[0]))
        f = ess_step(np.array([0.1]), target, np.random.default_rng(4), n_steps=5)
        assert f.shape == (1,)
        with pytest.raises(ValueError):
            ess_step(np.array([0.1]), TemperedTarget(ref, lambda F: np.full(1, -np.inf)),
                     np.random.default_rng(4))

    def test_beta_range(self):
        with pytest.raises(ValueError):
            TemperedTarget(GaussianRef(np.zeros(1), np.eye(1)), lambda F: 0.0, beta=1.5)


class TestToyPosterior:
    """Long chains on the two-point toy posterior against quadrature moments."""

    @staticmethod
    @pytest.fixture(scope="class")
    def oracle():
        from conftest import TOY_THETA, TOY_X
        from pmgpc.harness.oracle import quadrature_posterior_moments
        from pmgpc.kernel import gram
        from pmgpc.model import Dataset

        G = gram(TOY_X, TOY_THETA)
        _, mean, cov = quadrature_posterior_moments(Dataset(TOY_X, np.ones(2)), G, n_nodes=400)
        return G, mean, cov

    def _check(self, F, mean, cov):
        from pmgpc.diagnostics import batch_means_se

        second = np.stack([F[0] ** 2, F[1] ** 2, F[0] * F[1]], axis=1)
        target_second = [cov[0, 0] + mean[0] ** 2, cov[1, 1] + mean[1] ** 2, cov[0, 1] + mean[0] * mean[1]]
        stats_ = np.column_stack([F.T, second])
        expected = np.concatenate([mean, target_second])
        se = batch_means_se(stats_)
        z = np.abs(stats_.mean(axis=0) - expected) / se
        assert np.all(z < 3.0), z

    def test_prior_reference(self, oracle):
        from pmgpc.laplace import laplace_approx
        from pmgpc.model import log_likelihood

        G, mean, cov = oracle
        y = np.ones(2)
        target = TemperedTarget(GaussianRef.from_gram(G), lambda F: log_likelihood(F, y))
        f0 = laplace_approx(y, G).f_hat
        F = self._chain(f0, target, 100_000, seed=20140417)
        self._check(F, mean, cov)

    @staticmethod
    def _chain(f0, target, n, seed):
        rng = np.random.default_rng(seed)
        F = f0.reshape(-1, 1)
        delta = np.atleast_1d(target.delta(F))
        out = np.empty((F.shape[0], n))
        for i in range(n):
            F, delta, _ = ess_batch(F, delta, target, [rng])
            out[:, i] = F[:, 0]
        return out


def test_replay_is_bit_exact(rng):
    ref = GaussianRef(np.zeros(2), np.eye(2) * 3.0)
    target = TemperedTarget(ref, lambda F: np.sum(log_ndtr(F), axis=0))
    f0 = rng.normal(size=2)
    a = ess_step(f0, target, np.random.default_rng(5), n_steps=20)
    b = ess_step(f0, target, np.random.default_rng(5), n_steps=20)
    np.testing.assert_array_equal(a, b)
