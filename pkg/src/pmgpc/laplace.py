"""Laplace approximation to the latent posterior of the probit GP classifier."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .kernel import NumericalError, jittered_cholesky
from .model import LOG_2PI, log_likelihood, probit_derivatives

__all__ = ["GaussianRef", "LaplaceResult", "laplace_approx"]

W_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class GaussianRef:
    """Multivariate normal N(mean, L L^T) kept in factored form."""

    mean: np.ndarray
    cov_chol: np.ndarray
    log_det: float = None

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        L = np.asarray(self.cov_chol, dtype=float)
        if L.shape != (mean.size, mean.size):
            raise ValueError("cov_chol must be n x n")
        if not np.all(np.diag(L) > 0):
            raise ValueError("cov_chol needs a strictly positive diagonal")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov_chol", L)
        if self.log_det is None:
            object.__setattr__(self, "log_det", 2.0 * float(np.sum(np.log(np.diag(L)))))

    @classmethod
    def from_gram(cls, G):
        """The GP prior N(0, K) for a Gram matrix."""
        return cls(np.zeros(G.n), G.chol, G.log_det)

    @property
    def n(self):
        return self.mean.size

    @property
    def cov(self):
        return self.cov_chol @ self.cov_chol.T

    def sample(self, rng, size=None):
        """``mean + L xi``; with ``size`` the draws are returned as columns."""
        if size is None:
            return self.mean + self.cov_chol @ rng.standard_normal(self.n)
        xi = rng.standard_normal((self.n, size))
        return self.mean[:, None] + self.cov_chol @ xi

    def whiten(self, f):
        f = np.asarray(f, dtype=float)
        centred = f - (self.mean if f.ndim == 1 else self.mean[:, None])
        return linalg.solve_triangular(self.cov_chol, centred, lower=True, check_finite=False)

    def log_pdf(self, f):
        xi = self.whiten(f)
        return -0.5 * np.sum(xi * xi, axis=0) - 0.5 * self.log_det - 0.5 * self.n * LOG_2PI


@dataclass(frozen=True, eq=False)
class LaplaceResult:
    q: GaussianRef
    f_hat: np.ndarray
    log_marginal_la: float
    iterations: int
    converged: bool
    grad_norm: float = np.inf
    objective_trace: list = field(default_factory=list)


def laplace_approx(y, G, max_iter=100, tol=1e-9, grad_tol=1e-6, max_halvings=20):
    """Newton search for the posterior mode in the ``B = I + W^½ K W^½`` form.

    Each Newton step is taken in the ``a = K^-1 f`` parameterization and
    halved (up to ``max_halvings`` times) until the objective
    ``-½ aᵀf + log p(y|f)`` does not decrease. Iteration stops once the
    objective changes by less than ``tol * (1 + |objective|)`` and the
    gradient sup-norm is below ``grad_tol * max(1, |f|_inf)``.

    A failed factorization of ``B`` raises ``NumericalError``; running out
    of iterations only clears the ``converged`` flag.
    """
    y = np.asarray(y, dtype=float)
    n = G.n
    K = G.K_jittered
    theta = G.theta

    a = np.zeros(n)
    f = np.zeros(n)
    obj = float(log_likelihood(f, y))
    trace = [obj]
    change = np.inf
    converged = False
    it = 0
    while True:
        grad, W = probit_derivatives(f, y)
        W = np.maximum(W, W_FLOOR)
        sW = np.sqrt(W)
        B = np.eye(n) + sW[:, None] * K * sW[None, :]
        try:
            L = linalg.cholesky(B, lower=True, check_finite=False)
        except linalg.LinAlgError as exc:
            raise NumericalError("Cholesky of B failed in Laplace iteration", theta) from exc
        grad_norm = float(np.max(np.abs(grad - a)))
        if change < tol * (1.0 + abs(obj)) and grad_norm < grad_tol * max(1.0, np.max(np.abs(f))):
            converged = True
            break
        if it >= max_iter:
            break
        it += 1

        b = W * f + grad
        c = linalg.solve_triangular(L, sW * (K @ b), lower=True, check_finite=False)
        a_newton = b - sW * linalg.solve_triangular(L, c, lower=True, trans="T", check_finite=False)
        step = a_newton - a
        t = 1.0
        for _ in range(max_halvings + 1):
            a_try = a + t * step
            f_try = K @ a_try
            obj_try = float(-0.5 * a_try @ f_try + log_likelihood(f_try, y))
            if obj_try >= obj:
                break
            t *= 0.5
        else:
            # no ascent along the Newton direction: at the mode to rounding
            change = 0.0
            continue
        change = obj_try - obj
        a, f, obj = a_try, f_try, obj_try
        trace.append(obj)

    # Sigma = K - K W^½ B^-1 W^½ K
    V = linalg.solve_triangular(L, sW[:, None] * K, lower=True, check_finite=False)
    Sigma = K - V.T @ V
    S_chol, _ = jittered_cholesky(Sigma, theta=theta)
    q = GaussianRef(mean=f.copy(), cov_chol=S_chol)
    log_marginal = obj - float(np.sum(np.log(np.diag(L))))
    return LaplaceResult(
        q=q,
        f_hat=f,
        log_marginal_la=log_marginal,
        iterations=it,
        converged=converged,
        grad_norm=grad_norm,
        objective_trace=trace,
    )
