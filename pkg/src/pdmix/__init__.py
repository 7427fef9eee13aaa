"""Pairwise-dependent Bayesian nonparametric mixture inference.

Two interchangeable Gibbs samplers over grouped data — geometric-weight
measures (``pdgsbp``) and Dirichlet-process measures (``rpddp``) — plus the
closed-form moment layer, synthetic experiment suite, Hellinger evaluation,
and a runtime benchmark harness.
"""

from . import cli, distributions, experiments, model, pdgsbp, rpddp
from .distributions import BaseMeasureHyper, KernelParam
from .errors import ConfigError, InvariantViolation, NumericalError, ParameterError
from .experiments import (
    BenchResult,
    DensityGrid,
    GroupedDataset,
    MixtureSpec,
    benchmark_met,
    evaluation_grid,
    gen_borrowing,
    gen_gamma_mix,
    gen_nested,
    gen_seven_mix,
    gen_sparse_scalable,
    hellinger,
    load_pbcseq,
    posterior_selection_mean,
    predictive_grid,
)
from ._version import __version__
from .trace import ChainTrace

__all__ = [
    "BaseMeasureHyper",
    "BenchResult",
    "ChainTrace",
    "ConfigError",
    "DensityGrid",
    "GroupedDataset",
    "InvariantViolation",
    "KernelParam",
    "MixtureSpec",
    "NumericalError",
    "ParameterError",
    "benchmark_met",
    "cli",
    "distributions",
    "evaluation_grid",
    "experiments",
    "gen_borrowing",
    "gen_gamma_mix",
    "gen_nested",
    "gen_seven_mix",
    "gen_sparse_scalable",
    "hellinger",
    "load_pbcseq",
    "model",
    "pdgsbp",
    "posterior_selection_mean",
    "predictive_grid",
    "rpddp",
    "__version__",
]
