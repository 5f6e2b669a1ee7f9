"""Acquisition functions for minimization.

All functions take points of shape (n, D) (a single point of shape (D,) is
accepted) and return one value per point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import log_ndtr, ndtr

from xsearch.crossings import intensity_from_terms
from xsearch.gp import GPModel, _as_points

UCB_BETA = 2.0
EIC_RHO = 0.99
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass
class AcquisitionContext:
    """Everything an acquisition needs at one iteration.

    ``incumbent`` is the best observed objective value; ``safe_incumbent`` the
    best among observations satisfying every constraint (None if there is
    none yet).
    """

    objective: GPModel
    constraints: list[GPModel] = field(default_factory=list)
    min_samples: np.ndarray | None = None
    incumbent: float | None = None
    safe_incumbent: float | None = None
    ucb_beta: float = UCB_BETA
    rho: float = EIC_RHO

    def __post_init__(self):
        dims = {m.dim for m in self.constraints} | {self.objective.dim}
        if len(dims) != 1:
            raise ValueError("objective and constraint models differ in dimension")
        if self.min_samples is not None:
            self.min_samples = np.atleast_1d(np.asarray(self.min_samples, dtype=float))
        if self.incumbent is None and len(self.objective.data):
            self.incumbent = float(self.objective.data.outputs.min())

    @property
    def dim(self) -> int:
        return self.objective.dim


def alpha_x(ctx: AcquisitionContext, x) -> np.ndarray:
    """Crossing intensity averaged over the sampled minima."""
    if ctx.min_samples is None or not len(ctx.min_samples):
        raise ValueError("alpha_x needs at least one min-sample")
    x = _as_points(x, ctx.dim)
    terms = ctx.objective.gradient_terms(x)
    return intensity_from_terms(ctx.objective, terms, ctx.min_samples).mean(0)


def log_constraint_satisfaction_prob(ctx: AcquisitionContext, x) -> np.ndarray:
    x = _as_points(x, ctx.dim)
    total = np.zeros(len(x))
    for model in ctx.constraints:
        mean, var = model.predict(x)
        std = np.sqrt(var)
        pos = std > 0
        z = np.where(pos, -mean / np.where(pos, std, 1.0), 0.0)
        step = np.where(mean <= 0, 0.0, -np.inf)
        total += np.where(pos, log_ndtr(z), step)
    return total


def constraint_satisfaction_prob(ctx: AcquisitionContext, x) -> np.ndarray:
    """Product over constraints of ``P(g_j(x) <= 0)``; 1 when there are none."""
    return np.exp(log_constraint_satisfaction_prob(ctx, x))


def risky_objective(ctx: AcquisitionContext, x) -> np.ndarray:
    x = _as_points(x, ctx.dim)
    return alpha_x(ctx, x) * constraint_satisfaction_prob(ctx, x)


def _improvement_terms(model: GPModel, x, eta: float):
    mean, var = model.predict(x)
    std = np.sqrt(var)
    pos = std > 0
    z = np.where(pos, (eta - mean) / np.where(pos, std, 1.0), 0.0)
    return mean, std, pos, z


def expected_improvement(model: GPModel, x, eta: float) -> np.ndarray:
    mean, std, pos, z = _improvement_terms(model, x, eta)
    pdf = np.exp(-0.5 * z * z - _LOG_SQRT_2PI)
    val = (eta - mean) * ndtr(z) + std * pdf
    return np.where(pos, np.maximum(val, 0.0), np.maximum(eta - mean, 0.0))


def ei(ctx: AcquisitionContext, x) -> np.ndarray:
    if ctx.incumbent is None:
        raise ValueError("EI needs an incumbent")
    return expected_improvement(ctx.objective, _as_points(x, ctx.dim), ctx.incumbent)


def pi(ctx: AcquisitionContext, x) -> np.ndarray:
    if ctx.incumbent is None:
        raise ValueError("PI needs an incumbent")
    mean, _, pos, z = _improvement_terms(ctx.objective, _as_points(x, ctx.dim), ctx.incumbent)
    return np.where(pos, ndtr(z), (mean < ctx.incumbent).astype(float))


def ucb(ctx: AcquisitionContext, x) -> np.ndarray:
    """Lower-confidence score ``-mu + beta * sigma``, to be maximized."""
    mean, var = ctx.objective.predict(_as_points(x, ctx.dim))
    return -mean + ctx.ucb_beta * np.sqrt(var)


def eic(ctx: AcquisitionContext, x) -> np.ndarray:
    """EI against the best safe observation times the feasibility probability.

    Without any safe observation the feasibility probability alone is used.
    """
    x = _as_points(x, ctx.dim)
    prob = constraint_satisfaction_prob(ctx, x)
    if ctx.safe_incumbent is None:
        return prob
    return expected_improvement(ctx.objective, x, ctx.safe_incumbent) * prob


def eic_hard_objective(ctx: AcquisitionContext, x) -> np.ndarray:
    """Objective of the hard-threshold EIC: EI on the best safe observation."""
    if ctx.safe_incumbent is None:
        raise ValueError("hard-threshold EIC needs a safe incumbent")
    return expected_improvement(ctx.objective, _as_points(x, ctx.dim), ctx.safe_incumbent)
