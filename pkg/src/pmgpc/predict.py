"""Monte Carlo predictive class probabilities from posterior samples."""

from __future__ import annotations

import logging

import numpy as np
from scipy import linalg
from scipy.special import ndtr

from .estimators import prior_delta, spawn_streams
from .kernel import Hyperparams, cross_kernel, gram
from .laplace import GaussianRef, laplace_approx
from .slice_sampling import TemperedTarget, ess_step

__all__ = ["sample_latents", "predict_prob", "predictive"]

log = logging.getLogger(__name__)


def _as_theta(theta):
    return theta if isinstance(theta, Hyperparams) else Hyperparams.from_vector(theta)


def sample_latents(theta_samples, data, ess_iters=10, rng=None):
    """One latent draw per ``theta``: elliptical slice sampling on the exact
    posterior, started at the Laplace mode.

    Returns an array of shape ``(len(theta_samples), n)``.
    """
    thetas = [_as_theta(t) for t in theta_samples]
    streams = spawn_streams(rng, len(thetas))
    out = np.empty((len(thetas), data.n))
    for i, (theta, r) in enumerate(zip(thetas, streams)):
        G = gram(data.X, theta)
        f = laplace_approx(data.y, G).f_hat
        if ess_iters:
            target = TemperedTarget(GaussianRef.from_gram(G), prior_delta(data.y), 1.0)
            f = ess_step(f, target, r, n_steps=ess_iters)
        out[i] = f
    return out


def _latent_moments(X_star, f, G, data, theta):
    k = cross_kernel(data.X, X_star, theta)
    mean = k.T @ G.solve(f)
    V = linalg.solve_triangular(G.chol, k, lower=True, check_finite=False)
    var = theta.sigma - np.sum(V * V, axis=0)
    if np.any(var < 0):
        log.debug("clamping %d negative predictive variances", int(np.sum(var < 0)))
        var = np.maximum(var, 0.0)
    return mean, var


def predict_prob(x_star, f_sample, theta_sample, data):
    """``p(y* = +1 | f, theta) = Phi(m* / sqrt(1 + v*))`` for one sample pair.

    ``x_star`` may be a single input or an ``(m, d)`` array of inputs.
    """
    theta = _as_theta(theta_sample)
    X_star = np.atleast_2d(np.asarray(x_star, dtype=float))
    G = gram(data.X, theta)
    mean, var = _latent_moments(X_star, np.asarray(f_sample, float), G, data, theta)
    p = ndtr(mean / np.sqrt(1.0 + var))
    return float(p[0]) if np.ndim(x_star) == 1 else p


def predictive(X_star, f_samples, theta_samples, data):
    """Average of ``predict_prob`` over paired samples.

    Returns
    -------
    mean_prob, mc_std_error : ndarray
        Per test input; the standard error treats samples as independent.
    """
    X_star = np.atleast_2d(np.asarray(X_star, dtype=float))
    probs = np.array([predict_prob(X_star, f, th, data)
                      for f, th in zip(f_samples, theta_samples)])
    n_samples = probs.shape[0]
    se = probs.std(axis=0, ddof=1) / np.sqrt(n_samples) if n_samples > 1 else np.zeros(X_star.shape[0])
    return probs.mean(axis=0), se
