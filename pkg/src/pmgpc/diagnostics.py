"""Chain diagnostics: autocorrelation time and batch-means standard errors."""

import numpy as np


def integrated_autocorr_time(x, cutoff=0.05):
    """Integrated autocorrelation time, summing lags until the
    autocorrelation first drops below ``cutoff``."""
    x = np.asarray(x, dtype=float)
    x = x - x.mean()
    n = x.size
    spec = np.fft.rfft(x, 2 * n)
    acf = np.fft.irfft(spec * np.conj(spec))[:n]
    if acf[0] == 0:
        return 1.0
    acf /= acf[0]
    tau = 1.0
    for k in range(1, n):
        if acf[k] < cutoff:
            break
        tau += 2.0 * acf[k]
    return tau


def batch_means_se(x, n_batches=50):
    """Monte Carlo standard error of the mean of a correlated series.

    Works column-wise for 2-D input.
    """
    x = np.asarray(x, dtype=float)
    m = x.shape[0] // n_batches
    means = x[: m * n_batches].reshape((n_batches, m) + x.shape[1:]).mean(axis=1)
    return means.std(axis=0, ddof=1) / np.sqrt(n_batches)


def acceptance_rate(flags):
    return float(np.mean(np.asarray(flags, dtype=bool)))
