"""Pseudo-marginal Metropolis-Hastings over log covariance parameters.

The sampler first tunes a Gaussian random-walk proposal on ``log theta``
with the Laplace approximation standing in for the marginal likelihood,
then freezes the proposal and runs chains in which the marginal likelihood
is replaced by an unbiased IS or AIS estimate. The estimate attached to the
current state is recycled until a proposal is accepted.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .estimators import METHODS, ais_estimate, is_estimate
from .kernel import Hyperparams, NumericalError, gram
from .laplace import laplace_approx
from .model import PriorSpec, log_hyperprior, sample_hyperprior

__all__ = [
    "EstimatorConfig",
    "ChainState",
    "ProposalSpec",
    "ChainRecord",
    "RunConfig",
    "marginal_estimator",
    "log_marginal",
    "warmup_adapt",
    "mh_step",
    "pm_step",
    "run_chain",
    "run_chains",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EstimatorConfig:
    """How ``log p(y | theta)`` is obtained.

    ``method`` is one of ``is``, ``ais-prior``, ``ais-approx`` (unbiased
    estimates), ``la`` (Laplace approximation) or ``exact`` (quadrature,
    n <= 3 only).
    """

    method: str = "ais-approx"
    n_imp: int = 1
    ess_steps: int = 1
    schedule: tuple = None

    def __post_init__(self):
        if self.method not in METHODS + ("la", "exact"):
            raise ValueError(f"unknown estimator method {self.method!r}")
        if self.n_imp < 1:
            raise ValueError("n_imp must be >= 1")


def marginal_estimator(data, theta, config):
    """Prepare ``rng -> log p(y | theta)`` for repeated estimates at one ``theta``.

    The Gram matrix and Laplace approximation are computed once. Returns
    ``None`` when they fail: a Cholesky breakdown at maximum jitter or a
    Laplace approximation that did not converge.
    """
    try:
        G = gram(data.X, theta)
        if config.method == "exact":
            from .harness.oracle import quadrature_marginal

            value = math.log(quadrature_marginal(data, G, check=False))
            return lambda rng: value
        la = laplace_approx(data.y, G)
    except NumericalError as exc:
        log.debug("numerical failure at %s: %s", theta, exc)
        return None
    if not la.converged:
        log.debug("Laplace did not converge at %s", theta)
        return None
    if config.method == "la":
        return lambda rng: la.log_marginal_la
    if config.method == "is":
        return lambda rng: is_estimate(data.y, G, la, config.n_imp, rng).log_value
    start = "prior" if config.method == "ais-prior" else "approx"
    return lambda rng: ais_estimate(data.y, G, start, config.schedule, config.n_imp,
                                    config.ess_steps, rng, la).log_value


def log_marginal(data, theta, config, rng):
    """Log marginal likelihood (or its estimate) at ``theta``; ``-inf`` on failure."""
    fn = marginal_estimator(data, theta, config)
    return -np.inf if fn is None else fn(rng)


@dataclass(frozen=True)
class ChainState:
    theta: Hyperparams
    log_estimate: float
    log_hyperprior: float
    method: str
    iteration: int = 0
    accepted: bool = False


@dataclass(frozen=True)
class ProposalSpec:
    """Random walk ``log theta' = log theta + step_scales * xi``."""

    step_scales: tuple
    adapted: bool = False
    window_rates: tuple = ()

    def __post_init__(self):
        scales = tuple(float(s) for s in self.step_scales)
        if not all(s > 0 for s in scales):
            raise ValueError("step scales must be positive")
        object.__setattr__(self, "step_scales", scales)

    def rescale(self, factor):
        if self.adapted:
            raise RuntimeError("proposal is frozen after warm-up")
        return replace(self, step_scales=tuple(s * factor for s in self.step_scales))

    def propose(self, theta, rng):
        v = theta.to_vector()
        return Hyperparams.from_vector(v + np.asarray(self.step_scales) * rng.standard_normal(v.size))


@dataclass
class ChainRecord:
    thetas: np.ndarray
    log_estimates: np.ndarray
    accept_flags: np.ndarray
    burn_in: int = 0
    chain_id: int = 0
    n_failures: int = 0

    @property
    def window(self):
        return slice(self.burn_in, None)

    @property
    def acceptance_rate(self):
        return float(np.mean(self.accept_flags[self.window]))


def mh_step(state, prop, log_marginal_fn, prior, rng):
    """Metropolis-Hastings update of ``theta`` given a marginal (estimate) function.

    ``log_marginal_fn(theta, rng)`` is called only for the proposed point;
    the current state's value is reused as is.
    """
    theta_new = prop.propose(state.theta, rng)
    lp_new = log_hyperprior(theta_new, prior)
    le_new = log_marginal_fn(theta_new, rng.spawn(1)[0])
    log_u = math.log(rng.uniform())
    accepted = bool(np.isfinite(le_new)) and (
        log_u < le_new + lp_new - state.log_estimate - state.log_hyperprior
    )
    if accepted:
        return ChainState(theta_new, le_new, lp_new, state.method, state.iteration + 1, True)
    return replace(state, iteration=state.iteration + 1, accepted=False)


def pm_step(state, prop, estimator_config, data, prior, rng):
    """One pseudo-marginal MH transition with a frozen proposal."""
    if not prop.adapted:
        raise RuntimeError("pm_step requires an adapted (frozen) proposal")
    return mh_step(state, prop, lambda th, r: log_marginal(data, th, estimator_config, r),
                   prior, rng)


def _initial_state(data, prior, log_marginal_fn, method, rng, theta=None, max_tries=100):
    for _ in range(max_tries):
        th = theta if theta is not None else sample_hyperprior(prior, data.d, rng)
        le = log_marginal_fn(th, rng.spawn(1)[0])
        if np.isfinite(le):
            return ChainState(th, le, log_hyperprior(th, prior), method)
        if theta is not None:
            break
    raise NumericalError("could not find an initial state with a finite marginal estimate", theta)


def warmup_adapt(data, prior, init_theta=None, n_iter=2000, rng=None, window=100, kappa=1.0,
                 target=0.25, band=(0.20, 0.30), max_extra_windows=50, initial_scale=None,
                 log_marginal_fn=None):
    """Tune the global step size with Laplace marginals, then freeze it.

    Every ``window`` iterations the step size is multiplied by
    ``exp(kappa * (acc - target))``. After ``n_iter`` iterations, windows
    keep running (at most ``max_extra_windows``) until one lands inside
    ``band``; the step size used in that window is the one frozen.

    ``log_marginal_fn(theta, rng)`` overrides the Laplace marginal.
    """
    rng = np.random.default_rng(rng)
    if log_marginal_fn is None:
        la_config = EstimatorConfig(method="la")
        log_marginal_fn = lambda th, r: log_marginal(data, th, la_config, r)  # noqa: E731
    state = _initial_state(data, prior, log_marginal_fn, "la", rng, init_theta)
    p = 1 + prior.n_lengthscales(data.d)
    scale = initial_scale if initial_scale is not None else 1.0 / math.sqrt(p)
    prop = ProposalSpec((scale,) * p)
    rates = []
    n_windows = max(1, n_iter // window)
    k = 0
    while True:
        acc = 0
        for _ in range(window):
            state = mh_step(state, prop, log_marginal_fn, prior, rng)
            acc += state.accepted
        rate = acc / window
        rates.append(rate)
        k += 1
        if k >= n_windows:
            if band[0] <= rate <= band[1]:
                break
            if k >= n_windows + max_extra_windows:
                log.warning("warm-up ended outside the target band (last window %.2f)", rate)
                break
        prop = prop.rescale(math.exp(kappa * (rate - target)))
    return ProposalSpec(prop.step_scales, adapted=True, window_rates=tuple(rates))


def run_chain(data, prior, prop, estimator_config, n_iter, burn_in=0, rng=None, init_theta=None,
              chain_id=0):
    """Run one pseudo-marginal chain and record every iteration."""
    if not prop.adapted:
        raise RuntimeError("chains require an adapted (frozen) proposal")
    rng = np.random.default_rng(rng)
    failures = 0

    def fn(th, r):
        nonlocal failures
        value = log_marginal(data, th, estimator_config, r)
        failures += not np.isfinite(value)
        return value

    state = _initial_state(data, prior, fn, estimator_config.method, rng, init_theta)
    failures = 0
    p = len(state.theta.to_vector())
    thetas = np.empty((n_iter, p))
    log_est = np.empty(n_iter)
    flags = np.zeros(n_iter, dtype=bool)
    for t in range(n_iter):
        new = mh_step(state, prop, fn, prior, rng)
        if not new.accepted and new.log_estimate != state.log_estimate:
            raise AssertionError("estimate of the current state changed without acceptance")
        state = new
        thetas[t] = state.theta.to_vector()
        log_est[t] = state.log_estimate
        flags[t] = state.accepted
    return ChainRecord(thetas, log_est, flags, burn_in=burn_in, chain_id=chain_id,
                       n_failures=failures)


@dataclass(frozen=True)
class RunConfig:
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    ard: bool = False
    n_chains: int = 5
    n_iter: int = 2000
    burn_in: int = 500
    warmup_iters: int = 2000
    seed: int = 0
    n_jobs: int = 1
    prior: PriorSpec = None

    def prior_for(self, d):
        return self.prior if self.prior is not None else PriorSpec.default(d, self.ard)


def _chain_job(args):
    data, prior, prop, est, n_iter, burn_in, seq, chain_id = args
    return run_chain(data, prior, prop, est, n_iter, burn_in, np.random.default_rng(seq),
                     chain_id=chain_id)


def run_chains(data, config, proposal=None):
    """Warm up once, then run ``config.n_chains`` independent chains.

    Each chain starts from its own hyperprior draw. Streams are spawned from
    ``config.seed`` per chain, so results do not depend on ``n_jobs``.

    Returns
    -------
    records : list of ChainRecord
    proposal : ProposalSpec
    """
    prior = config.prior_for(data.d)
    seqs = np.random.SeedSequence(config.seed).spawn(config.n_chains + 1)
    if proposal is None:
        proposal = warmup_adapt(data, prior, n_iter=config.warmup_iters,
                                rng=np.random.default_rng(seqs[0]))
    jobs = [(data, prior, proposal, config.estimator, config.n_iter, config.burn_in, seqs[c + 1], c)
            for c in range(config.n_chains)]
    if config.n_jobs > 1:
        with ProcessPoolExecutor(config.n_jobs) as pool:
            records = list(pool.map(_chain_job, jobs))
    else:
        records = [_chain_job(j) for j in jobs]
    return records, proposal


def pooled_acceptance(records):
    rates = np.array([r.acceptance_rate for r in records])
    return float(rates.mean()), float(rates.std(ddof=1)) if rates.size > 1 else 0.0
