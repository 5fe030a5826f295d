"""Experiment harness: synthetic data, datasets, oracle and studies."""

from .datasets import DatasetSpec, bundled_dataset, load_dataset, BUNDLED
from .oracle import quadrature_marginal
from .studies import RStudyResult, acceptance_benchmark, r_statistic, r_study
from .synthetic import gen_synthetic

__all__ = [
    "BUNDLED",
    "DatasetSpec",
    "RStudyResult",
    "acceptance_benchmark",
    "bundled_dataset",
    "gen_synthetic",
    "load_dataset",
    "quadrature_marginal",
    "r_statistic",
    "r_study",
]
