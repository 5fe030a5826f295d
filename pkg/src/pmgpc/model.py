"""Densities of the probit GP classifier and its Gamma hyperpriors.

Latent vectors may be passed as a single ``(n,)`` array or as an ``(n, m)``
array holding ``m`` vectors in its columns; densities are then returned per
column.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from .kernel import Hyperparams

__all__ = [
    "Dataset",
    "PriorSpec",
    "log_ndtr",
    "log_likelihood",
    "probit_derivatives",
    "log_gp_prior",
    "log_hyperprior",
    "sample_hyperprior",
    "log_unnorm_posterior_f",
]

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_means: np.ndarray = None
    feature_sds: np.ndarray = None
    name: str = ""

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"{X.shape[0]} inputs but {y.shape[0]} labels")
        if X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError("need n >= 1 and d >= 1")
        if not np.all(np.isfinite(X)):
            raise ValueError("non-finite input values")
        if not np.all((y == 1.0) | (y == -1.0)):
            raise ValueError("labels must be -1 or +1")
        d = X.shape[1]
        means = np.zeros(d) if self.feature_means is None else np.asarray(self.feature_means, float)
        sds = np.ones(d) if self.feature_sds is None else np.asarray(self.feature_sds, float)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_means", means)
        object.__setattr__(self, "feature_sds", sds)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def subset(self, idx):
        return Dataset(self.X[idx], self.y[idx], self.feature_means, self.feature_sds, self.name)


@dataclass(frozen=True)
class PriorSpec:
    """Gamma(shape, rate) priors on sigma and the length-scales."""

    sigma_shape: float = 1.1
    sigma_rate: float = 0.1
    tau_shape: float = 1.0
    tau_rate: float = 1.0
    ard: bool = False

    def __post_init__(self):
        for name in ("sigma_shape", "sigma_rate", "tau_shape", "tau_rate"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @classmethod
    def default(cls, d, ard=False):
        """Priors used throughout: Ga(1.1, 0.1) on sigma, Ga(1, 1/sqrt(d)) or
        Ga(1, 1) per dimension on the length-scales."""
        if ard:
            return cls(tau_shape=1.0, tau_rate=1.0, ard=True)
        return cls(tau_shape=1.0, tau_rate=1.0 / np.sqrt(d), ard=False)

    def n_lengthscales(self, d):
        return d if self.ard else 1


def log_ndtr(x):
    """log of the standard normal CDF, stable far into the lower tail."""
    return special.log_ndtr(x)


def log_likelihood(f, y):
    """Probit log-likelihood ``sum_i log Phi(y_i f_i)``."""
    f = np.asarray(f, dtype=float)
    y = np.asarray(y, dtype=float)
    if f.shape[0] != y.shape[0]:
        raise ValueError(f"{f.shape[0]} latents but {y.shape[0]} labels")
    z = f * y if f.ndim == 1 else f * y[:, None]
    return np.sum(log_ndtr(z), axis=0)


def probit_derivatives(f, y):
    """Gradient and negative Hessian diagonal of the probit log-likelihood.

    Returns
    -------
    grad : ndarray
        ``y_i N(z_i) / Phi(z_i)`` with ``z_i = y_i f_i``.
    W : ndarray
        ``r_i (r_i + z_i)`` where ``r_i = N(z_i) / Phi(z_i)``; positive by
        log-concavity of Phi.
    """
    z = np.asarray(y, float) * np.asarray(f, float)
    log_pdf = -0.5 * z * z - 0.5 * LOG_2PI
    r = np.exp(log_pdf - log_ndtr(z))
    return y * r, r * (r + z)


def log_gp_prior(f, G):
    """``log N(f | 0, K + jitter I)`` using the Gram matrix factor."""
    f = np.asarray(f, dtype=float)
    alpha = linalg.solve_triangular(G.chol, f, lower=True, check_finite=False)
    quad = np.sum(alpha * alpha, axis=0)
    return -0.5 * quad - 0.5 * G.log_det - 0.5 * G.n * LOG_2PI


def _gamma_logpdf(x, shape, rate):
    return shape * np.log(rate) - special.gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x


def log_hyperprior(theta, prior):
    """Gamma log-density of ``theta`` expressed over the log-parameters.

    The Jacobian of the log transform (``log sigma + sum log tau``) is
    included, so this is the density the random walk on log-scale sees.
    """
    n_ls = len(theta.log_lengthscales)
    if not prior.ard and n_ls > 1:
        raise ValueError(f"isotropic prior but theta has {n_ls} length-scales")
    lp = _gamma_logpdf(theta.sigma, prior.sigma_shape, prior.sigma_rate) + theta.log_sigma
    ls = theta.lengthscales
    lp += np.sum(_gamma_logpdf(ls, prior.tau_shape, prior.tau_rate)) + np.sum(np.log(ls))
    return float(lp)


def sample_hyperprior(prior, d, rng):
    """Draw ``theta`` from the Gamma hyperpriors."""
    sigma = rng.gamma(prior.sigma_shape, 1.0 / prior.sigma_rate)
    taus = rng.gamma(prior.tau_shape, 1.0 / prior.tau_rate, size=prior.n_lengthscales(d))
    return Hyperparams.from_natural(sigma, taus)


def log_unnorm_posterior_f(f, y, G):
    """``log p(y | f) + log N(f | 0, K)``."""
    return log_likelihood(f, y) + log_gp_prior(f, G)
