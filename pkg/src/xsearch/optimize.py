"""Multi-start maximization over the unit hypercube.

Objectives are batch callables mapping an (n, D) array to n values. Start
points are the best members of a scrambled Sobol pool; ties keep the lower
index, so a constant objective returns the first pool point.
"""

from __future__ import annotations

import logging
from typing import Callable

import numpy as np
from scipy.optimize import minimize
from scipy.stats import qmc

log = logging.getLogger(__name__)

BatchFn = Callable[[np.ndarray], np.ndarray]

INFEASIBLE = None
MAX_CALLS = 200
FD_STEP = 1e-6
RAW_SAMPLES = 512


def sobol_points(n: int, dim: int, seed: int) -> np.ndarray:
    sampler = qmc.Sobol(d=dim, scramble=True, seed=np.random.default_rng(seed))
    m = int(np.ceil(np.log2(max(n, 2))))
    return sampler.random_base2(m)[:n]


def _value_and_grad(x: np.ndarray, fn: BatchFn, h: float):
    """Negated value and central-difference gradient from one batch call."""
    dim = len(x)
    plus = np.minimum(x + h * np.eye(dim), 1.0)
    minus = np.maximum(x - h * np.eye(dim), 0.0)
    vals = np.asarray(fn(np.vstack([x[None, :], plus, minus])), dtype=float)
    width = plus.diagonal() - minus.diagonal()
    grad = (vals[1:dim + 1] - vals[dim + 1:]) / width
    if not np.all(np.isfinite(vals)):
        return np.inf, np.zeros(dim)
    return -vals[0], -grad


def maximize_unconstrained(fn: BatchFn, dim: int, restarts: int = 10, seed: int = 0,
                           raw_samples: int = RAW_SAMPLES, max_calls: int = MAX_CALLS,
                           fd_step: float = FD_STEP) -> tuple[np.ndarray, float]:
    """Best of ``restarts`` L-BFGS-B searches with finite-difference gradients.

    Returns ``(x, value)``. If every local search fails, the best start wins.
    """
    pool = sobol_points(max(raw_samples, restarts), dim, seed)
    pool_vals = np.asarray(fn(pool), dtype=float)
    pool_vals = np.where(np.isfinite(pool_vals), pool_vals, -np.inf)
    order = np.argsort(-pool_vals, kind="stable")[:restarts]

    best_x, best_val = pool[order[0]].copy(), float(pool_vals[order[0]])
    candidates = []
    for idx in order:
        x0 = pool[idx]
        try:
            res = minimize(_value_and_grad, x0, args=(fn, fd_step), jac=True,
                           method="L-BFGS-B", bounds=[(0.0, 1.0)] * dim,
                           options={"maxfun": max_calls, "gtol": 1e-12})
        except (ValueError, np.linalg.LinAlgError) as exc:
            log.debug("local search from start %d failed: %s", idx, exc)
            continue
        if np.isfinite(res.fun):
            candidates.append((np.clip(res.x, 0.0, 1.0), -float(res.fun)))
    for x, val in candidates:
        if val > best_val:
            best_x, best_val = x, val
    return best_x, best_val


class _Tracker:
    """Caches joint evaluations and remembers the best feasible point seen."""

    def __init__(self, fn: BatchFn, log_feas: BatchFn, log_rho: float):
        self.fn, self.log_feas, self.log_rho = fn, log_feas, log_rho
        self.best_x, self.best_val = None, -np.inf
        self._key, self._cache = None, None

    def record(self, xs: np.ndarray, vals: np.ndarray, lf: np.ndarray) -> None:
        for x, v, c in zip(xs, vals, lf):
            if c >= self.log_rho and np.isfinite(v) and v > self.best_val:
                self.best_x, self.best_val = x.copy(), float(v)

    def eval(self, x: np.ndarray):
        x = np.clip(x, 0.0, 1.0)
        key = x.tobytes()
        if key != self._key:
            v = float(np.asarray(self.fn(x[None, :]))[0])
            c = float(np.asarray(self.log_feas(x[None, :]))[0])
            self.record(x[None, :], [v], [c])
            self._key, self._cache = key, (v, c)
        return self._cache

    def objective(self, x):
        v, _ = self.eval(x)
        return -v if np.isfinite(v) else 1e300

    def constraint(self, x):
        _, c = self.eval(x)
        return max(c, -1e300) - self.log_rho


def maximize_constrained(fn: BatchFn, feasibility: BatchFn, rho: float, dim: int,
                         restarts: int = 10, seed: int = 0, raw_samples: int = RAW_SAMPLES,
                         max_calls: int = MAX_CALLS, log_feasibility: BatchFn | None = None):
    """Maximize ``fn`` subject to ``feasibility(x) >= rho`` with multi-start COBYLA.

    Feasible pool points are preferred as starts (best objective first), then
    the least infeasible ones. Returns ``(x, value)`` for the best feasible
    point evaluated anywhere, or ``(INFEASIBLE, nan)`` if none was found.
    """
    if log_feasibility is None:
        def log_feasibility(x):
            return np.log(np.maximum(np.asarray(feasibility(x), dtype=float), 1e-300))

    log_rho = float(np.log(rho))
    tracker = _Tracker(fn, log_feasibility, log_rho)
    pool = sobol_points(max(raw_samples, restarts), dim, seed)
    vals = np.asarray(fn(pool), dtype=float)
    lf = np.asarray(log_feasibility(pool), dtype=float)
    tracker.record(pool, vals, lf)

    feasible = lf >= log_rho
    vals_rank = np.where(np.isfinite(vals), vals, -np.inf)
    feas_idx = np.flatnonzero(feasible)
    feas_idx = feas_idx[np.argsort(-vals_rank[feas_idx], kind="stable")]
    infeas_idx = np.flatnonzero(~feasible)
    infeas_idx = infeas_idx[np.argsort(-lf[infeas_idx], kind="stable")]
    starts = np.concatenate([feas_idx, infeas_idx])[:restarts]

    cons = [{"type": "ineq", "fun": tracker.constraint}]
    for idx in starts:
        try:
            minimize(tracker.objective, pool[idx], method="COBYLA", constraints=cons,
                     bounds=[(0.0, 1.0)] * dim,
                     options={"maxiter": max_calls, "rhobeg": 0.1, "tol": 1e-6})
        except (ValueError, np.linalg.LinAlgError) as exc:
            log.debug("COBYLA from start %d failed: %s", idx, exc)
    if tracker.best_x is None:
        return INFEASIBLE, float("nan")
    return tracker.best_x, tracker.best_val
