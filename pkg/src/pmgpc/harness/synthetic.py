"""Synthetic two-dimensional classification data drawn from the GP model."""

from __future__ import annotations

import logging

import numpy as np
from scipy.special import ndtr

from ..kernel import Hyperparams, gram
from ..model import Dataset

log = logging.getLogger(__name__)


def gen_synthetic(n, sigma=20.0, tau=0.255, seed=None, max_redraws=1000, return_latent=False):
    """Inputs uniform on the unit square, labels from a probit GP draw.

    The latent function and labels are redrawn until the classes are
    balanced to within ``max(1, 0.05 n)`` of ``n / 2``.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(n, 2))
    G = gram(X, Hyperparams.from_natural(sigma, [tau]))
    slack = max(1.0, 0.05 * n)
    for attempt in range(max_redraws):
        f = G.chol @ rng.standard_normal(n)
        y = np.where(rng.uniform(size=n) < ndtr(f), 1.0, -1.0)
        if abs(np.sum(y > 0) - n / 2) <= slack:
            if attempt:
                log.info("class balance reached after %d redraws", attempt)
            data = Dataset(X, y, name=f"synthetic-{n}")
            return (data, f) if return_latent else data
    raise RuntimeError(f"no balanced draw in {max_redraws} attempts (sigma={sigma}, tau={tau})")
