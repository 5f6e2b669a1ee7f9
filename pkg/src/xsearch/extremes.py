"""Distribution of the global minimum.

The minimum of the posterior over a finite grid is approximated by treating
grid values as independent, ``P(f_* >= a) ~ prod_x Phi((mu(x) - a)/sigma(x))``.
A Frechet law with finite upper support at the incumbent ``eta`` is matched
to two quantiles of that surrogate (restricted to ``f_* <= eta``); samples
are drawn by inverting its survival function. A Gumbel law matched to the
unrestricted surrogate is kept for comparison since it puts mass above ``eta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from xsearch.gp import GPModel

Q_MIN = 1.01
Q_MAX = 50.0
DEFAULT_TARGETS = (0.25, 0.75)
DEFAULT_KAPPA = 1e-4
_TINY_SCALE = 1e-12


@dataclass(frozen=True)
class FrechetParams:
    eta: float
    s: float
    q: float

    def __post_init__(self):
        if not self.s > 0:
            raise ValueError(f"scale s must be positive, got {self.s}")
        if not self.q > 1:
            raise ValueError(f"shape q must exceed 1, got {self.q}")


@dataclass(frozen=True)
class GumbelParams:
    """Gumbel law for a minimum: ``P(f_* >= a) = exp(-exp((a - loc)/scale))``."""

    loc: float
    scale: float


@dataclass(frozen=True)
class MinSampleSet:
    samples: np.ndarray
    seed: int

    def __len__(self) -> int:
        return len(self.samples)


def survival(p: FrechetParams, a):
    """``P(f_* >= a)`` under the Frechet law ``p``."""
    a = np.asarray(a, dtype=float)
    w = p.eta - a
    with np.errstate(divide="ignore", over="ignore"):
        val = np.exp(-np.power(np.maximum(w, 0.0) / p.s, -p.q))
    out = np.where(w > 0, val, 0.0)
    return float(out) if out.ndim == 0 else out


def _log_surrogate(mean, std, a):
    """log prod_x Phi((mu(x) - a)/sigma(x)) with sigma = 0 entries as steps."""
    pos = std > 0
    z = (mean[pos] - a) / std[pos]
    total = float(log_ndtr(z).sum())
    if np.any(mean[~pos] < a):
        return -math.inf
    return total


def _bisect(fn, lo: float, hi: float, target: float, tol: float) -> float:
    """Root of a decreasing ``fn`` on [lo, hi] to within ``tol``."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if fn(mid) > target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _solve_two_quantiles(levels_w, probs) -> tuple[float, float]:
    """Frechet (s, q) from ``-log p_i = (w_i / s)^(-q)`` at two points."""
    (w1, w2), (p1, p2) = levels_w, probs
    l1, l2 = math.log(-math.log(p1)), math.log(-math.log(p2))
    w1, w2 = max(w1, 1e-300), max(w2, 1e-300)
    denom = math.log(w2) - math.log(w1)
    q = (l1 - l2) / denom if denom > 0 else Q_MAX
    q = min(max(q, Q_MIN), Q_MAX)
    log_s = 0.5 * ((math.log(w1) + l1 / q) + (math.log(w2) + l2 / q))
    return math.exp(log_s), q


def fit_frechet_from_moments(mean, std, eta: float, targets=DEFAULT_TARGETS,
                             kappa: float = DEFAULT_KAPPA) -> FrechetParams:
    """Fit (s, q) from per-point posterior moments on a grid.

    ``targets`` are survival probabilities of the surrogate restricted to
    ``f_* <= eta``. Levels are located by bisection on the gap
    ``w = eta - a`` to accuracy ``min(kappa, 1e-4 * bracket)``.
    """
    mean = np.asarray(mean, dtype=float).ravel()
    std = np.asarray(std, dtype=float).ravel()
    if not len(mean):
        raise ValueError("grid must be nonempty")
    if len(targets) != 2 or not all(0 < t < 1 for t in targets):
        raise ValueError("need exactly two target probabilities in (0, 1)")
    if not np.any(std > 0):
        return FrechetParams(eta, _TINY_SCALE, Q_MIN)

    log_s_eta = _log_surrogate(mean, std, eta)
    s_eta = math.exp(log_s_eta)
    if s_eta >= 1.0 - 1e-12:
        return FrechetParams(eta, _TINY_SCALE, Q_MIN)

    def cond_survival(w):
        return (math.exp(_log_surrogate(mean, std, eta - w)) - s_eta) / (1.0 - s_eta)

    w_hi = max(float(np.max(eta - (mean - 8.0 * std))), 1e-300)
    while cond_survival(w_hi) < max(targets) and w_hi < 1e6:
        w_hi *= 2.0
    tol = min(kappa, 1e-4 * w_hi)
    # cond_survival increases with w, so bisect on its negation
    levels = [_bisect(lambda w: -cond_survival(w), 0.0, w_hi, -t, tol) for t in targets]
    s, q = _solve_two_quantiles(levels, targets)
    return FrechetParams(eta, max(s, _TINY_SCALE), q)


def fit_frechet(model: GPModel, grid, targets=DEFAULT_TARGETS, kappa: float = DEFAULT_KAPPA,
                include_observed: bool = True) -> FrechetParams:
    """Fit the Frechet law of the minimum from a model snapshot.

    ``eta`` is the best observed output. Observed inputs are added to the grid
    unless ``include_observed`` is false.
    """
    if not len(model.data):
        raise ValueError("objective dataset is empty; eta undefined")
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    if include_observed:
        grid = np.vstack([grid, model.data.inputs])
    mean, var = model.predict(grid)
    eta = float(model.data.outputs.min())
    return fit_frechet_from_moments(mean, np.sqrt(var), eta, targets, kappa)


def sample_min(p: FrechetParams, n_samples: int, seed: int) -> MinSampleSet:
    """Inverse-CDF draws ``eta - s * (-log(1 - xi))^(-1/q)``."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    xi = np.random.default_rng(seed).random(n_samples)
    return MinSampleSet(frechet_inverse(p, xi), seed)


def frechet_inverse(p: FrechetParams, xi):
    xi = np.asarray(xi, dtype=float)
    e = -np.log1p(-xi)
    with np.errstate(divide="ignore"):
        return p.eta - p.s * np.power(np.maximum(e, 1e-300), -1.0 / p.q)


def fit_gumbel_from_moments(mean, std, kappa: float = DEFAULT_KAPPA) -> GumbelParams:
    """Gumbel on the unrestricted independence surrogate.

    Scale from the quartiles, location from the median of the surrogate.
    """
    mean = np.asarray(mean, dtype=float).ravel()
    std = np.asarray(std, dtype=float).ravel()
    lo = float(np.min(mean - 8.0 * std))
    hi = float(np.min(mean + 8.0 * std))
    if hi - lo <= 0:
        return GumbelParams(float(mean.min()), 0.0)  # point mass

    def surv(a):
        return math.exp(_log_surrogate(mean, std, a))

    tol = min(kappa, 1e-4 * (hi - lo))
    a_hi, a_med, a_lo = (_bisect(surv, lo, hi, t, tol) for t in (0.25, 0.5, 0.75))
    scale = (a_hi - a_lo) / (math.log(math.log(4.0)) - math.log(math.log(4.0 / 3.0)))
    if not scale > 0:
        scale = _TINY_SCALE
    return GumbelParams(a_med - scale * math.log(math.log(2.0)), scale)


def sample_gumbel(p: GumbelParams, n_samples: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.random(n_samples)
    if p.scale == 0.0:
        return np.full(n_samples, p.loc)
    return p.loc + p.scale * np.log(-np.log(np.clip(g, 1e-300, 1.0 - 1e-16)))


def gumbel_comparison(model: GPModel, grid, n_repeats: int, seed: int,
                      n_samples: int = 1000) -> tuple[float, float]:
    """Percentage of min-samples above ``eta`` for the Frechet and Gumbel fits.

    Both laws are fitted once to the surrogate over ``grid``; each repeat
    draws ``n_samples`` from each with its own seed. Returns
    ``(frechet_exceed_pct, gumbel_exceed_pct)`` averaged over repeats.
    """
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    mean, var = model.predict(grid)
    eta = float(model.data.outputs.min())
    return compare_from_moments(mean, np.sqrt(var), eta, n_repeats, seed, n_samples)


def compare_from_moments(mean, std, eta: float, n_repeats: int, seed: int,
                         n_samples: int = 1000) -> tuple[float, float]:
    fre = fit_frechet_from_moments(mean, std, eta)
    gum = fit_gumbel_from_moments(mean, std)
    rng = np.random.default_rng(seed)
    f_pct, g_pct = [], []
    for _ in range(n_repeats):
        f_draw = frechet_inverse(fre, rng.random(n_samples))
        g_draw = sample_gumbel(gum, n_samples, rng)
        f_pct.append(100.0 * np.mean(f_draw > eta))
        g_pct.append(100.0 * np.mean(g_draw > eta))
    return float(np.mean(f_pct)), float(np.mean(g_pct))
