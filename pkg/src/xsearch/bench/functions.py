"""Benchmark objectives on the unit hypercube and their normalization."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from xsearch.optimize import sobol_points

_H6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_H6_A = np.array([
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
])
_H6_P = 1e-4 * np.array([
    [1312, 1696, 5569, 124, 8283, 5886],
    [2329, 4135, 8307, 3736, 1004, 9991],
    [2348, 1451, 3522, 2883, 3047, 6650],
    [4047, 8828, 8732, 5743, 1091, 381],
])
HARTMANN6_LITERATURE_ARGMIN = (0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573)


def _rows(x, dim: int | None = None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if dim is not None and x.shape[1] != dim:
        raise ValueError(f"expected {dim} columns, got {x.shape[1]}")
    return x


def hartmann6(x) -> np.ndarray:
    """Hartmann 6D (four terms, minimization orientation), vectorized over rows."""
    x = _rows(x, 6)
    inner = (_H6_A[None, :, :] * (x[:, None, :] - _H6_P[None, :, :]) ** 2).sum(-1)
    return -(_H6_ALPHA * np.exp(-inner)).sum(-1)


def michalewicz(x, steepness: int = 10) -> np.ndarray:
    """Michalewicz on [0, 1]^D, mapped internally to [0, pi]^D."""
    z = math.pi * _rows(x)
    i = np.arange(1, z.shape[1] + 1)
    return -(np.sin(z) * np.sin(i * z**2 / math.pi) ** (2 * steepness)).sum(-1)


def forrester(x) -> np.ndarray:
    x = _rows(x, 1)[:, 0]
    return (6.0 * x - 2.0) ** 2 * np.sin(12.0 * x - 4.0)


def sinprod_constraint(x, dim: int | None = None) -> np.ndarray:
    """``prod_i sin(2 pi x_i) - 2^-D``; positive values are violations.

    The ``2 pi`` argument scaling makes the sign pattern split the unit cube
    into 2^D cells with 2^(D-1) disjoint unsafe regions.
    """
    x = _rows(x, dim)
    d = x.shape[1]
    return np.prod(np.sin(2.0 * math.pi * x), axis=1) - 2.0 ** (-d)


@dataclass(frozen=True)
class BenchmarkSpec:
    """A raw benchmark plus the affine normalization applied on evaluation.

    ``__call__`` maps unit-cube points through ``domain`` and returns
    ``(f_raw - mean) / std``.
    """

    name: str
    dim: int
    raw: Callable
    domain: tuple[tuple[float, float], ...] = ()
    mean: float = 0.0
    std: float = 1.0
    raw_min: float | None = None
    norm_seed: int | None = None

    def map_domain(self, x) -> np.ndarray:
        x = _rows(x, self.dim)
        if not self.domain:
            return x
        lo = np.array([b[0] for b in self.domain])
        hi = np.array([b[1] for b in self.domain])
        return lo + x * (hi - lo)

    def __call__(self, x) -> np.ndarray:
        return (self.raw(self.map_domain(x)) - self.mean) / self.std

    @property
    def true_min(self) -> float | None:
        if self.raw_min is None:
            return None
        return (self.raw_min - self.mean) / self.std


def normalize_benchmark(spec: BenchmarkSpec, n_mc: int = 100_000, seed: int = 0) -> BenchmarkSpec:
    """Freeze Monte Carlo estimates of the raw mean and stddev into ``spec``."""
    if n_mc < 10_000:
        raise ValueError("n_mc must be at least 1e4")
    x = np.random.default_rng(seed).random((n_mc, spec.dim))
    vals = spec.raw(spec.map_domain(x))
    std = float(np.std(vals, ddof=1))
    if std < 1e-12:
        raise ValueError(f"{spec.name}: output is constant, cannot normalize")
    return replace(spec, mean=float(np.mean(vals)), std=std, norm_seed=seed)


def refine_minimum(fn: Callable, dim: int, starts: np.ndarray) -> tuple[np.ndarray, float]:
    """Best L-BFGS-B local minimum of a batch function from the given starts."""
    def scalar(x):
        return float(fn(x[None, :])[0])

    best_x, best_val = None, math.inf
    for x0 in np.atleast_2d(starts):
        res = minimize(scalar, x0, method="L-BFGS-B", bounds=[(0.0, 1.0)] * dim,
                       options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 2000})
        if res.fun < best_val:
            best_x, best_val = res.x, float(res.fun)
    return best_x, best_val


def hartmann6_minimum(n_starts: int = 64, seed: int = 0) -> tuple[np.ndarray, float]:
    """Refine from the literature optimizer plus Sobol starts."""
    starts = np.vstack([HARTMANN6_LITERATURE_ARGMIN, sobol_points(n_starts, 6, seed)])
    return refine_minimum(hartmann6, 6, starts)


def michalewicz_minimum(dim: int, steepness: int = 10,
                        grid_size: int = 200_001) -> tuple[np.ndarray, float]:
    """Exact-to-refinement minimum; the function is a sum of 1D terms."""
    t = np.linspace(0.0, 1.0, grid_size)
    argmin = np.empty(dim)
    total = 0.0
    for i in range(1, dim + 1):
        def term(u, i=i):
            z = math.pi * np.asarray(u, dtype=float)
            return -np.sin(z) * np.sin(i * z**2 / math.pi) ** (2 * steepness)

        vals = term(t)
        k = int(np.argmin(vals))
        res = minimize(lambda u: float(term(u[0])), [t[k]], method="L-BFGS-B",
                       bounds=[(max(t[k] - 1e-4, 0.0), min(t[k] + 1e-4, 1.0))],
                       options={"ftol": 1e-15, "gtol": 1e-14})
        argmin[i - 1] = res.x[0]
        total += float(res.fun)
    return argmin, total


def forrester_minimum() -> tuple[np.ndarray, float]:
    t = np.linspace(0.0, 1.0, 100_001)[:, None]
    k = int(np.argmin(forrester(t)))
    return refine_minimum(forrester, 1, t[k][None, :])
