"""Elliptical slice sampling for Gaussian-times-residual targets.

A target has unnormalized log density

    log N(f | m, S) + beta * delta(f)

where ``N(m, S)`` is the ellipse-defining reference and ``delta`` the
non-Gaussian factor at full strength. The same operator covers the exact
posterior (prior reference, ``delta = log p(y|f)``, ``beta = 1``), annealing
from the prior, and annealing from a Gaussian approximation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .laplace import GaussianRef

__all__ = ["TemperedTarget", "ess_step", "ess_batch"]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True, eq=False)
class TemperedTarget:
    reference: GaussianRef
    delta: Callable
    beta: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.beta <= 1.0:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")

    def scaled(self, delta_values):
        if self.beta == 0.0:
            return np.zeros_like(np.asarray(delta_values, dtype=float))
        return self.beta * np.asarray(delta_values, dtype=float)

    def log_residual(self, f):
        f = np.asarray(f, dtype=float)
        if self.beta == 0.0:
            return np.zeros(f.shape[1]) if f.ndim == 2 else 0.0
        return self.beta * self.delta(f)


def ess_batch(F, delta, target, rngs, stall_tol=1e-12):
    """One elliptical slice transition for each column of ``F``.

    Parameters
    ----------
    F : ndarray, shape (n, m)
        Current states, one per column.
    delta : ndarray, shape (m,)
        ``target.delta`` evaluated at the current states.
    target : TemperedTarget
    rngs : sequence of numpy Generators
        One stream per column; column ``j`` consumes only ``rngs[j]``, so the
        result does not depend on how columns are grouped.
    stall_tol : float
        A column whose angle bracket shrinks below this width keeps its
        current state.

    Returns
    -------
    F_new, delta_new : ndarray
    n_stalls : int
    """
    ref = target.reference
    n, m = F.shape
    mean = ref.mean[:, None]
    centred = F - mean
    nu = np.empty((n, m))
    eta = np.empty(m)
    alpha = np.empty(m)
    lo = np.empty(m)
    hi = np.empty(m)
    current = target.scaled(delta)
    for j, rng in enumerate(rngs):
        nu[:, j] = ref.cov_chol @ rng.standard_normal(n)
        eta[j] = current[j] + np.log(rng.uniform())
        alpha[j] = rng.uniform(0.0, TWO_PI)
        lo[j], hi[j] = alpha[j] - TWO_PI, alpha[j]

    F_new = F.copy()
    delta_new = np.array(delta, dtype=float, copy=True)
    pending = np.arange(m)
    n_stalls = 0
    while pending.size:
        a = alpha[pending]
        prop = mean + centred[:, pending] * np.cos(a) + nu[:, pending] * np.sin(a)
        d_prop = np.atleast_1d(target.delta(prop))
        ok = target.scaled(d_prop) > eta[pending]
        F_new[:, pending[ok]] = prop[:, ok]
        delta_new[pending[ok]] = d_prop[ok]
        still = []
        for j in pending[~ok]:
            if alpha[j] < 0.0:
                lo[j] = alpha[j]
            else:
                hi[j] = alpha[j]
            if hi[j] - lo[j] < stall_tol:
                n_stalls += 1
                continue
            alpha[j] = rngs[j].uniform(lo[j], hi[j])
            still.append(j)
        pending = np.asarray(still, dtype=int)
    return F_new, delta_new, n_stalls


def ess_step(f, target, rng, n_steps=1):
    """Apply ``n_steps`` elliptical slice transitions to a single state.

    Returns the new state; stalls (bracket collapse) leave the state
    unchanged.
    """
    F = np.asarray(f, dtype=float).reshape(-1, 1)
    delta = np.atleast_1d(target.delta(F))
    if not np.all(np.isfinite(target.scaled(delta))):
        raise ValueError("log residual at the starting point must be finite")
    for _ in range(n_steps):
        F, delta, _ = ess_batch(F, delta, target, [rng])
    return F[:, 0]
