"""Estimator-variance study and acceptance-rate benchmark."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ..estimators import METHODS, spawn_streams
from ..kernel import Hyperparams
from ..model import PriorSpec, log_hyperprior
from ..pm_mcmc import (
    EstimatorConfig,
    RunConfig,
    log_marginal,
    marginal_estimator,
    pooled_acceptance,
    run_chain,
    run_chains,
    warmup_adapt,
)
from .synthetic import gen_synthetic

log = logging.getLogger(__name__)

LOG10 = math.log(10.0)


def r_statistic(data, theta, estimator_config, reps=50, rng=None):
    """Sample sd of ``log10`` marginal-likelihood estimates over ``reps`` calls.

    Returns ``inf`` if any estimate (or the Laplace step) fails.
    """
    if reps < 2:
        raise ValueError("reps must be >= 2")
    fn = marginal_estimator(data, theta, estimator_config)
    if fn is None:
        log.warning("r statistic: estimator setup failed at %s", theta)
        return math.inf
    values = np.array([fn(r) for r in spawn_streams(rng, reps)]) / LOG10
    if not np.all(np.isfinite(values)):
        log.warning("r statistic: non-finite estimate at %s", theta)
        return math.inf
    return float(np.std(values, ddof=1))


@dataclass(frozen=True, eq=False)
class RStudyResult:
    n: int
    method: str
    r_values: np.ndarray
    thetas: np.ndarray = None

    @property
    def median(self):
        return float(np.median(self.r_values))

    def quantiles(self, qs=(0.0, 0.25, 0.5, 0.75, 1.0)):
        return dict(zip(qs, np.quantile(self.r_values, qs)))


def laplace_map(data, prior):
    """``theta`` maximizing the Laplace marginal times the hyperprior on ``log theta``."""
    la = EstimatorConfig(method="la")
    p = 1 + prior.n_lengthscales(data.d)

    def neg(v):
        th = Hyperparams.from_vector(v)
        value = log_marginal(data, th, la, None) + log_hyperprior(th, prior)
        return -value if np.isfinite(value) else 1e300

    res = optimize.minimize(neg, np.zeros(p), method="Nelder-Mead",
                            options=dict(xatol=1e-3, fatol=1e-6, maxiter=500 * p))
    return Hyperparams.from_vector(res.x)


def tune_n_imp(data, theta, method="ais-approx", rng=None, target_sd=0.5, reps=50, max_imp=64):
    """Smallest power of two ``N_imp`` whose log-estimate sd at ``theta`` is at most ``target_sd``."""
    rng = np.random.default_rng(rng)
    n_imp = 1
    while n_imp < max_imp:
        fn = marginal_estimator(data, theta, EstimatorConfig(method=method, n_imp=n_imp))
        if fn is not None:
            values = np.array([fn(r) for r in spawn_streams(rng, reps)])
            if np.all(np.isfinite(values)) and np.std(values, ddof=1) <= target_sd:
                break
        n_imp *= 2
    return n_imp


def posterior_theta_draws(data, n_draws=50, seed=0, warmup_iters=1000, burn_in=500, thin=10,
                          estimator=None):
    """Thinned draws of ``theta`` from a preliminary pseudo-marginal run.

    The chain starts at the Laplace MAP of ``theta``. Unless ``estimator`` is
    given, AIS-approx is used with ``N_imp`` tuned there so that the sd of
    the log estimate is at most 0.5; with noisier estimates a short chain
    sticks for hundreds of iterations and the draws cluster on a few values.
    """
    prior = PriorSpec.default(data.d)
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    seqs = root.spawn(3)
    start = laplace_map(data, prior)
    prop = warmup_adapt(data, prior, init_theta=start, n_iter=warmup_iters,
                        rng=np.random.default_rng(seqs[0]))
    if estimator is None:
        n_imp = tune_n_imp(data, start, rng=np.random.default_rng(seqs[2]))
        log.info("preliminary run: n=%d, N_imp=%d", data.n, n_imp)
        estimator = EstimatorConfig(method="ais-approx", n_imp=n_imp)
    rec = run_chain(data, prior, prop, estimator, burn_in + n_draws * thin, burn_in,
                    np.random.default_rng(seqs[1]), init_theta=start)
    return rec.thetas[burn_in::thin][:n_draws]


def _r_job(args):
    data, theta_vec, config, reps, seq = args
    return r_statistic(data, Hyperparams.from_vector(theta_vec), config, reps,
                       np.random.default_rng(seq))


def r_study(n_list=(10, 50, 100, 500, 1000), methods=METHODS, n_imp=4, seed=0, n_theta=50,
            reps=50, n_jobs=1, sigma=20.0, tau=0.255, prelim=None):
    """r distributions over posterior ``theta`` draws for each data size and method.

    ``prelim`` holds keyword overrides for ``posterior_theta_draws``.
    """
    prelim = dict(prelim or {})
    root = np.random.SeedSequence(seed)
    results = []
    for n, seq_n in zip(n_list, root.spawn(len(n_list))):
        data_seq, chain_seq, r_seq = seq_n.spawn(3)
        data = gen_synthetic(n, sigma, tau, seed=data_seq)
        thetas = posterior_theta_draws(data, n_theta, seed=chain_seq, **prelim)
        for method, m_seq in zip(methods, r_seq.spawn(len(methods))):
            config = EstimatorConfig(method=method, n_imp=n_imp)
            jobs = [(data, th, config, reps, s) for th, s in zip(thetas, m_seq.spawn(len(thetas)))]
            if n_jobs > 1:
                with ProcessPoolExecutor(n_jobs) as pool:
                    r = list(pool.map(_r_job, jobs))
            else:
                r = [_r_job(j) for j in jobs]
            log.info("n=%d %s median r=%.3g", n, method, np.median(r))
            results.append(RStudyResult(n, method, np.asarray(r), thetas))
    return results


@dataclass(frozen=True)
class BenchRow:
    dataset: str
    covariance: str
    method: str
    n_imp: int
    mean: float
    sd: float
    per_chain: tuple

    @property
    def cell(self):
        """Percent acceptance as ``mean (sd)``."""
        return f"{100 * self.mean:.1f} ({100 * self.sd:.1f})"


def acceptance_benchmark(data, covariance="iso", method="ais-approx", n_imp=1, seed=0,
                         n_chains=5, n_iter=2000, burn_in=500, warmup_iters=2000, n_jobs=1,
                         proposal=None):
    """Warm-up plus ``n_chains`` pseudo-marginal chains; acceptance mean and sd."""
    config = RunConfig(
        estimator=EstimatorConfig(method=method, n_imp=n_imp),
        ard=(covariance == "ard"),
        n_chains=n_chains,
        n_iter=n_iter,
        burn_in=burn_in,
        warmup_iters=warmup_iters,
        seed=seed,
        n_jobs=n_jobs,
    )
    records, _ = run_chains(data, config, proposal=proposal)
    mean, sd = pooled_acceptance(records)
    return BenchRow(data.name, covariance, method, n_imp, mean, sd,
                    tuple(r.acceptance_rate for r in records))
