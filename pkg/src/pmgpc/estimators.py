"""Unbiased marginal-likelihood estimators: IS and AIS.

Every estimator returns the log of an unbiased estimate of ``p(y | theta)``
together with the per-sample log weights. Importance samples (trajectories)
each own a dedicated random stream spawned from the caller's generator, so
results do not depend on the order they are evaluated in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .laplace import GaussianRef
from .model import log_gp_prior, log_likelihood
from .slice_sampling import TemperedTarget, ess_batch

__all__ = [
    "TemperatureSchedule",
    "LogMarginalEstimate",
    "geometric_schedule",
    "logsumexp",
    "spawn_streams",
    "prior_delta",
    "approx_delta",
    "is_estimate",
    "ais_estimate",
]

METHODS = ("is", "ais-prior", "ais-approx")


@dataclass(frozen=True)
class TemperatureSchedule:
    """Inverse temperatures ``1 = beta_0 > ... > beta_s = 0``."""

    betas: tuple

    def __post_init__(self):
        b = tuple(float(v) for v in self.betas)
        if len(b) < 2 or b[0] != 1.0 or b[-1] != 0.0:
            raise ValueError("schedule must start at 1 and end at 0")
        if any(x <= y for x, y in zip(b[:-1], b[1:])):
            raise ValueError("schedule must be strictly decreasing")
        object.__setattr__(self, "betas", b)

    @property
    def s(self):
        return len(self.betas) - 1

    def __len__(self):
        return len(self.betas)


@dataclass(frozen=True, eq=False)
class LogMarginalEstimate:
    log_value: float
    log_weights: np.ndarray
    method: str
    n_imp: int
    ess_stalls: int = 0

    @classmethod
    def from_log_weights(cls, log_weights, method, ess_stalls=0):
        lw = np.asarray(log_weights, dtype=float)
        return cls(
            log_value=logsumexp(lw) - math.log(lw.size),
            log_weights=lw,
            method=method,
            n_imp=lw.size,
            ess_stalls=ess_stalls,
        )


def n_levels(n):
    """Number of annealing segments for ``n`` data: ceil(sqrt n), made even."""
    s = math.isqrt(n - 1) + 1 if n > 1 else 1
    return s + (s % 2)


def geometric_schedule(n):
    """Geometrically spaced inverse temperatures for ``n`` data points.

    With ``s = n_levels(n)``: ``s/2`` values log-uniform from 1 to 0.2
    (both included), ``s/2`` values log-uniform after 0.2 down to 1e-6
    (1e-6 included), then 0.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    half = n_levels(n) // 2
    upper = np.geomspace(1.0, 0.2, half) if half > 1 else np.array([1.0])
    lower = np.geomspace(0.2, 1e-6, half + 1)[1:]
    return TemperatureSchedule(tuple(upper) + tuple(lower) + (0.0,))


def logsumexp(v):
    """``log(sum(exp(v)))`` by shifting with the maximum."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("logsumexp of an empty sequence")
    vmax = np.max(v)
    if vmax == -np.inf:
        return -np.inf
    if vmax == np.inf:
        return np.inf
    return float(vmax + np.log(np.sum(np.exp(v - vmax))))


def spawn_streams(rng, k):
    """``k`` independent generators derived deterministically from ``rng``."""
    if isinstance(rng, np.random.Generator):
        return rng.spawn(k)
    return np.random.default_rng(rng).spawn(k)


def prior_delta(y):
    """Log residual relative to the prior reference: ``log p(y|f)``."""
    return lambda F: log_likelihood(F, y)


def approx_delta(y, G, q):
    """Log residual relative to ``q``: ``log N(f|0,K) + log p(y|f) - log q(f)``."""
    return lambda F: log_gp_prior(F, G) + log_likelihood(F, y) - q.log_pdf(F)


def _draw(ref, streams):
    n = ref.n
    xi = np.column_stack([r.standard_normal(n) for r in streams])
    return ref.mean[:, None] + ref.cov_chol @ xi


def is_estimate(y, G, la, n_imp, rng):
    """Importance sampling from the Laplace approximation ``la.q``."""
    if not la.converged:
        raise ValueError("Laplace approximation did not converge")
    streams = spawn_streams(rng, n_imp)
    F = _draw(la.q, streams)
    return LogMarginalEstimate.from_log_weights(approx_delta(y, G, la.q)(F), "is")


def ais_estimate(y, G, start="approx", schedule=None, n_imp=1, ess_steps_per_level=1,
                 rng=None, la=None):
    """Annealed importance sampling from the prior or from ``la.q``.

    Each trajectory starts from the reference ``g_s``, is moved by
    ``ess_steps_per_level`` elliptical slice transitions at every
    intermediate temperature ``beta_{s-1} .. beta_1``, and accumulates
    ``sum_i (beta_i - beta_{i+1}) * delta(f_i)``.
    """
    if schedule is None:
        schedule = geometric_schedule(G.n)
    elif not isinstance(schedule, TemperatureSchedule):
        schedule = TemperatureSchedule(tuple(schedule))
    if start == "prior":
        ref = GaussianRef.from_gram(G)
        delta = prior_delta(y)
        method = "ais-prior"
    elif start == "approx":
        if la is None or not la.converged:
            raise ValueError("annealing from the approximation needs a converged Laplace result")
        ref = la.q
        delta = approx_delta(y, G, la.q)
        method = "ais-approx"
    else:
        raise ValueError(f"unknown start {start!r}")

    streams = spawn_streams(rng, n_imp)
    betas = schedule.betas
    s = schedule.s
    F = _draw(ref, streams)
    d = np.atleast_1d(delta(F))
    log_w = np.zeros(n_imp)
    stalls = 0
    for i in range(s - 1, -1, -1):
        log_w += (betas[i] - betas[i + 1]) * d
        if i >= 1:
            target = TemperedTarget(ref, delta, betas[i])
            for _ in range(ess_steps_per_level):
                F, d, st = ess_batch(F, d, target, streams)
                stalls += st
    return LogMarginalEstimate.from_log_weights(log_w, method, ess_stalls=stalls)
