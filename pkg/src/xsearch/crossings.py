"""Level-crossing statistics of (conditioned) Gaussian processes.

The pointwise crossing intensity at threshold ``u`` is the density of
``f(x)`` at ``u`` times the expected L1 norm of the gradient given
``f(x) = u``. Its integral over a 1D domain is the expected number of
crossings, which for a stationary prior reduces to twice Rice's formula.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from xsearch.gp import GPModel, GradientPosterior, KernelParams

_LOG_FLUSH = -700.0
_MIN_VAR = 1e-12
_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


@dataclass(frozen=True)
class CrossingQuery:
    u: float
    x: np.ndarray
    model: GPModel

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float)).reshape(-1)
        if x.shape[0] != self.model.dim:
            raise ValueError(f"query has D={x.shape[0]}, model has D={self.model.dim}")
        if x.min() < 0.0 or x.max() > 1.0:
            raise ValueError("query point must lie in the unit hypercube")
        object.__setattr__(self, "x", x)


def rice_upcrossings(params: KernelParams, u: float) -> float:
    """Expected number of upcrossings of ``u`` on [0, 1] by the stationary prior."""
    if params.dim != 1:
        raise ValueError("Rice's formula is defined here for D = 1 only")
    k0 = params.signal_variance
    # -k''(0)/k(0) = 1/ell^2 for the SE kernel
    return math.sqrt(1.0 / params.lengthscales[0] ** 2) / (2.0 * math.pi) * math.exp(
        -(u * u) / (2.0 * k0)
    )


def folded_normal_mean(m, v):
    """``E|Z|`` for ``Z ~ N(m, v^2)``; equals ``|m|`` at ``v = 0``."""
    m = np.asarray(m, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(v < 0):
        raise ValueError("standard deviation must be nonnegative")
    pos = v > 0
    safe_v = np.where(pos, v, 1.0)
    with np.errstate(over="ignore"):
        g = m / safe_v
        val = 2.0 * safe_v * np.exp(-0.5 * g * g - _LOG_SQRT_2PI) + m * erf(g / _SQRT2)
    out = np.where(pos, val, np.abs(m))
    return float(out) if out.ndim == 0 else out


def normal_density(u, mean, var):
    """Gaussian density evaluated in log space; values below exp(-700) are 0."""
    var = np.maximum(var, _MIN_VAR)
    logp = -0.5 * (u - mean) ** 2 / var - 0.5 * np.log(var) - _LOG_SQRT_2PI
    return np.where(logp < _LOG_FLUSH, 0.0, np.exp(np.maximum(logp, _LOG_FLUSH)))


def intensity_from_terms(model: GPModel, terms: dict, u) -> np.ndarray:
    """Crossing intensity for precomputed :meth:`GPModel.gradient_terms`.

    ``u`` may be an array of S thresholds; the result then has shape (S, n).
    """
    u = np.asarray(u, dtype=float)
    dens = normal_density(u[..., None], terms["mean"], terms["var"])
    mu, nu = model.virtual_gradient(terms, u)
    return dens * folded_normal_mean(mu, nu).sum(-1)


def crossing_intensity(model: GPModel, x, u) -> np.ndarray:
    """Vectorized crossing intensity at points ``x`` (n, D) and thresholds ``u``."""
    return intensity_from_terms(model, model.gradient_terms(x), u)


def crossing_intensity_nd(q: CrossingQuery) -> float:
    return float(crossing_intensity(q.model, q.x[None, :], q.u)[0])


def crossing_intensity_1d(q: CrossingQuery) -> float:
    if q.model.dim != 1:
        raise ValueError("crossing_intensity_1d requires D = 1")
    m, var = q.model.predict(q.x[None, :])
    g = q.model.gradient_posterior_with_virtual(q.x, q.u)
    dens = normal_density(q.u, m[0], var[0])
    return float(dens * folded_normal_mean(g.mean[0], g.stddev[0]))


def mc_crossing_oracle(q: CrossingQuery | GradientPosterior, n_samples: int,
                       seed: int) -> tuple[float, float]:
    """Monte Carlo estimate of ``E[||grad f||_1 | f(x) = u, data]``.

    Samples the gradient marginals directly (the L1 norm's expectation only
    depends on them). Returns the estimate and its standard error.
    """
    if n_samples < 1000:
        raise ValueError("n_samples must be at least 1000")
    g = q if isinstance(q, GradientPosterior) else q.model.gradient_posterior_with_virtual(q.x, q.u)
    rng = np.random.default_rng(seed)
    draws = g.mean + g.stddev * rng.standard_normal((n_samples, len(g.mean)))
    l1 = np.abs(draws).sum(1)
    return float(l1.mean()), float(l1.std(ddof=1) / math.sqrt(n_samples))
