"""RBF covariance, Gram matrices and jittered Cholesky factorization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

__all__ = [
    "Hyperparams",
    "GramMatrix",
    "NumericalError",
    "kernel_eval",
    "cross_kernel",
    "gram",
    "jittered_cholesky",
]

# relative jitter ladder tried after a plain factorization fails
JITTER_LADDER = tuple(10.0 ** k for k in range(-10, -1))


class NumericalError(ArithmeticError):
    """A factorization failed even at the largest jitter.

    The offending hyperparameters (if known) are kept on ``theta``.
    """

    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


@dataclass(frozen=True)
class Hyperparams:
    """Covariance parameters stored on the log scale.

    ``log_lengthscales`` has length 1 for an isotropic kernel and length d
    for ARD.
    """

    log_sigma: float
    log_lengthscales: tuple

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(self.log_lengthscales))
        if len(ls) < 1:
            raise ValueError("at least one length-scale is required")
        object.__setattr__(self, "log_sigma", float(self.log_sigma))
        object.__setattr__(self, "log_lengthscales", ls)
        if not np.all(np.isfinite(self.to_vector())):
            raise ValueError(f"non-finite hyperparameters: {self}")

    @classmethod
    def from_natural(cls, sigma, lengthscales):
        return cls(np.log(sigma), np.log(np.atleast_1d(lengthscales)))

    @classmethod
    def from_vector(cls, v):
        v = np.asarray(v, dtype=float)
        return cls(v[0], v[1:])

    def to_vector(self):
        return np.array((self.log_sigma,) + self.log_lengthscales)

    @property
    def sigma(self):
        return float(np.exp(self.log_sigma))

    @property
    def lengthscales(self):
        return np.exp(np.array(self.log_lengthscales))

    @property
    def ard(self):
        return len(self.log_lengthscales) > 1

    def lengthscales_for(self, d):
        """Length-scale per input dimension, broadcasting the isotropic case."""
        ls = self.lengthscales
        if ls.size == 1:
            return np.full(d, ls[0])
        if ls.size != d:
            raise ValueError(f"{ls.size} length-scales for {d} input dimensions")
        return ls


@dataclass(frozen=True, eq=False)
class GramMatrix:
    K: np.ndarray
    chol: np.ndarray
    jitter: float
    log_det: float
    theta: Hyperparams | None = None

    @property
    def n(self):
        return self.K.shape[0]

    @property
    def K_jittered(self):
        return self.K + self.jitter * np.eye(self.n)

    def solve(self, b):
        """Solve ``(K + jitter I) x = b`` with the stored factor."""
        return linalg.cho_solve((self.chol, True), b, check_finite=False)


def _scaled_sqdist(A, B, lengthscales):
    # explicit per-coordinate accumulation, same order for every entry
    out = np.zeros((A.shape[0], B.shape[0]))
    for r in range(A.shape[1]):
        diff = (A[:, r][:, None] - B[:, r][None, :]) / lengthscales[r]
        out += diff * diff
    return out


def cross_kernel(A, B, theta):
    """Covariance matrix ``k(a_i, b_j | theta)`` between two input sets."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    if A.shape[1] != B.shape[1]:
        raise ValueError(f"dimension mismatch: {A.shape[1]} vs {B.shape[1]}")
    ls = theta.lengthscales_for(A.shape[1])
    return theta.sigma * np.exp(-0.5 * _scaled_sqdist(A, B, ls))


def kernel_eval(x_i, x_j, theta):
    """RBF covariance between two input vectors."""
    x_i = np.atleast_1d(np.asarray(x_i, dtype=float))
    x_j = np.atleast_1d(np.asarray(x_j, dtype=float))
    if x_i.shape != x_j.shape or x_i.ndim != 1:
        raise ValueError(f"dimension mismatch: {x_i.shape} vs {x_j.shape}")
    return float(cross_kernel(x_i[None, :], x_j[None, :], theta)[0, 0])


def jittered_cholesky(A, scale=None, theta=None):
    """Lower Cholesky factor of ``A + jitter I`` with escalating jitter.

    Tries jitter 0 first, then ``1e-10 * scale`` growing by factors of 10 up
    to ``1e-2 * scale``. ``scale`` defaults to the mean diagonal of ``A``.

    Returns
    -------
    chol : ndarray
    jitter : float
        The jitter actually added.
    """
    A = np.asarray(A, dtype=float)
    if scale is None:
        scale = float(np.mean(np.diag(A)))
    eye = np.eye(A.shape[0])
    for jitter in (0.0,) + tuple(scale * j for j in JITTER_LADDER):
        try:
            L = linalg.cholesky(A + jitter * eye, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
        if np.all(np.isfinite(L)) and np.all(np.diag(L) > 0):
            return L, jitter
    raise NumericalError(
        f"Cholesky failed at maximum jitter {scale * JITTER_LADDER[-1]:.3g}", theta
    )


def gram(X, theta):
    """Gram matrix of ``X`` under ``theta`` with its jittered Cholesky factor."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 1:
        raise ValueError("need at least one input")
    K = cross_kernel(X, X, theta)
    chol, jitter = jittered_cholesky(K, scale=theta.sigma, theta=theta)
    log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return GramMatrix(K=K, chol=chol, jitter=jitter, log_det=log_det, theta=theta)
