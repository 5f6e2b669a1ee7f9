"""Objectives drawn from a GP prior.

A joint prior draw is taken on an irregular (uniform random) grid, a GP is
conditioned on those values, and its posterior mean serves as the ground
truth. The draw uses the Cholesky factor of ``K + sigma_n^2 I``, so the same
factor also yields the posterior weights: for ``y = L z`` the weights are
``(K + sigma_n^2 I)^-1 y = L^-T z``.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from xsearch.gp import KernelParams, cholesky_jittered, se_kernel

LOWER_BOUND = -4.0
DEFAULT_GRID = {1: 500, 2: 2000, 3: 8000}


class PosteriorMeanFunction:
    """``x -> k(x, grid) @ weights``; deterministic and vectorized."""

    def __init__(self, params: KernelParams, grid: np.ndarray, values: np.ndarray,
                 weights: np.ndarray):
        self.params = params
        self.grid = grid
        self.values = values
        self.weights = weights
        self.dim = grid.shape[1]

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x[None, :]
        out = np.empty(len(x))
        for start in range(0, len(x), 2048):
            chunk = x[start:start + 2048]
            out[start:start + 2048] = se_kernel(self.params, chunk, self.grid) @ self.weights
        return out


def sample_gp_function(params: KernelParams, dim: int, grid_size: int,
                       seed) -> PosteriorMeanFunction:
    rng = np.random.default_rng(seed)
    grid = rng.random((grid_size, dim))
    k = se_kernel(params, grid, grid)
    k[np.diag_indices(grid_size)] += params.noise_variance
    chol, _ = cholesky_jittered(k, params.signal_variance)
    del k
    z = rng.standard_normal(grid_size)
    values = chol @ z
    weights = sla.solve_triangular(chol, z, lower=True, trans="T", check_finite=False)
    return PosteriorMeanFunction(params, grid, values, weights)


def gp_sample_problem(params: KernelParams | None = None, dim: int = 3,
                      grid_size: int | None = None, seed: int = 0):
    """Objective and constraint from independent GP-prior draws.

    Defaults to lengthscale 0.1 and unit signal variance.
    """
    params = params or KernelParams.isotropic(dim, 0.1, 1.0)
    if params.dim != dim:
        raise ValueError("kernel dimension does not match D")
    grid_size = grid_size or DEFAULT_GRID.get(dim, 8000)
    obj_seed, con_seed = np.random.SeedSequence(seed).spawn(2)
    objective = sample_gp_function(params, dim, grid_size, obj_seed)
    constraint = sample_gp_function(params, dim, grid_size, con_seed)
    return objective, constraint
