"""Pseudo-marginal MCMC for Gaussian process classifiers with IS and AIS
marginal-likelihood estimates."""

__version__ = "0.1.0"

from .estimators import (
    LogMarginalEstimate,
    TemperatureSchedule,
    ais_estimate,
    geometric_schedule,
    is_estimate,
    logsumexp,
)
from .kernel import GramMatrix, Hyperparams, NumericalError, gram, kernel_eval
from .laplace import GaussianRef, LaplaceResult, laplace_approx
from .model import (
    Dataset,
    PriorSpec,
    log_gp_prior,
    log_hyperprior,
    log_likelihood,
    log_unnorm_posterior_f,
)
from .pm_mcmc import EstimatorConfig, RunConfig, pm_step, run_chains, warmup_adapt
from .predict import predict_prob, predictive, sample_latents
from .slice_sampling import TemperedTarget, ess_step
