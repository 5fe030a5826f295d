"""Tensor Gauss-Hermite quadrature of the marginal likelihood for tiny n."""

from __future__ import annotations

import logging
from functools import lru_cache

import numpy as np
from scipy import special
from scipy.special import ndtr


log = logging.getLogger(__name__)

MAX_NODES = {1: 12800, 2: 3200, 3: 800}
CHUNK_POINTS = 1 << 20


@lru_cache(maxsize=16)
def _rule(m):
    # probabilists' Hermite: weight exp(-x^2/2), normalized to a N(0,1) expectation
    x, w = special.roots_hermitenorm(m)
    return x, w / np.sqrt(2.0 * np.pi)


def _tensor_quadrature(y, L, m):
    x, w = _rule(m)
    n = L.shape[0]
    # f = L xi with L lower triangular, so f_k depends on xi_1..xi_k only and
    # the tensor sum nests axis by axis; Phi products need no log scale here
    p1 = ndtr(y[0] * L[0, 0] * x)
    if n == 1:
        return float(w @ p1)
    if n == 2:
        p2 = ndtr(y[1] * (L[1, 0] * x[:, None] + L[1, 1] * x[None, :]))
        return float((w * p1) @ (p2 @ w))
    total = 0.0
    chunk = max(1, CHUNK_POINTS // (m * m))
    for start in range(0, m, chunk):
        x0 = x[start:start + chunk, None, None]
        p2 = ndtr(y[1] * (L[1, 0] * x0[:, :, 0] + L[1, 1] * x[None, :]))
        f3 = L[2, 0] * x0 + L[2, 1] * x[None, :, None] + L[2, 2] * x[None, None, :]
        inner = ndtr(y[2] * f3) @ w
        total += float((w[start:start + chunk] * p1[start:start + chunk]) @ ((p2 * inner) @ w))
    return total


def quadrature_marginal(data, G, n_nodes=200, tol=1e-10, check=True):
    """``p(y | theta) = int p(y|f) N(f|0,K) df`` by quadrature, for n <= 3.

    The latent vector is whitened as ``f = L xi`` and the standard normal
    expectation over ``xi`` is computed on an ``n_nodes``-per-axis tensor
    Gauss-Hermite grid. With ``check`` the node count is doubled until two
    successive values agree to ``tol`` relative; the finer value is returned.
    """
    y = np.asarray(data.y, dtype=float)
    n = y.size
    if n > 3:
        raise ValueError(f"quadrature oracle supports n <= 3, got n = {n}")
    L = G.chol
    value = _tensor_quadrature(y, L, n_nodes)
    if not check:
        return value
    m = n_nodes
    while 2 * m <= MAX_NODES[n]:
        m *= 2
        finer = _tensor_quadrature(y, L, m)
        if abs(finer - value) <= tol * abs(finer):
            return finer
        value = finer
    log.warning("quadrature not converged to %.1e at %d nodes per axis", tol, m)
    return value


def quadrature_posterior_moments(data, G, n_nodes=200):
    """Normalizer, mean and covariance of ``p(f | y, theta)`` by quadrature (n <= 3)."""
    y = np.asarray(data.y, dtype=float)
    n = y.size
    if n > 3:
        raise ValueError(f"quadrature oracle supports n <= 3, got n = {n}")
    x, w = _rule(n_nodes)
    grids = np.meshgrid(*([x] * n), indexing="ij")
    xi = np.stack([g.ravel() for g in grids])
    wt = np.prod(np.stack(np.meshgrid(*([w] * n), indexing="ij")), axis=0).ravel()
    f = G.chol @ xi
    p = wt * np.prod(ndtr(y[:, None] * f), axis=0)
    Z = p.sum()
    mean = f @ p / Z
    centred = f - mean[:, None]
    cov = (centred * p) @ centred.T / Z
    return Z, mean, cov
