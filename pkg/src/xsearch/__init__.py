"""Excursion search: Bayesian optimization driven by expected level crossings."""

from xsearch.gp import (
    Dataset,
    FactorizationError,
    GPModel,
    GradientPosterior,
    HyperPriors,
    KernelParams,
    PosteriorGaussian,
    fit_hyperparameters,
    kernel_eval,
    sample_prior_on_grid,
)
from xsearch.crossings import (
    CrossingQuery,
    crossing_intensity_1d,
    crossing_intensity_nd,
    folded_normal_mean,
    mc_crossing_oracle,
    rice_upcrossings,
)
from xsearch.extremes import (
    FrechetParams,
    MinSampleSet,
    fit_frechet,
    gumbel_comparison,
    sample_min,
    survival,
)
from xsearch.budget import BudgetState, ControllerConfig, update_rho, select_branch
from xsearch.loop import RunConfig, recommend, run, run_xs, run_xsf

__version__ = "0.1.0"

__all__ = [
    "BudgetState",
    "ControllerConfig",
    "CrossingQuery",
    "Dataset",
    "FactorizationError",
    "FrechetParams",
    "GPModel",
    "GradientPosterior",
    "HyperPriors",
    "KernelParams",
    "MinSampleSet",
    "PosteriorGaussian",
    "RunConfig",
    "crossing_intensity_1d",
    "crossing_intensity_nd",
    "fit_frechet",
    "fit_hyperparameters",
    "folded_normal_mean",
    "gumbel_comparison",
    "kernel_eval",
    "mc_crossing_oracle",
    "recommend",
    "rice_upcrossings",
    "run",
    "run_xs",
    "run_xsf",
    "sample_min",
    "sample_prior_on_grid",
    "select_branch",
    "survival",
    "update_rho",
]
