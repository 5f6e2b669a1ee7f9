"""Named problems: objective, constraints and the reference minimum for regret."""

from __future__ import annotations

import functools
import re
from dataclasses import dataclass, field
from typing import Callable

from xsearch.bench import functions as fns
from xsearch.bench.gp_problems import LOWER_BOUND, gp_sample_problem
from xsearch.gp import KernelParams

NORM_SEED = 0
NORM_SAMPLES = 100_000


@dataclass(frozen=True)
class Problem:
    """Batch callables on the unit cube. ``g(x) > 0`` marks a violation.

    ``true_min`` is the constrained-agnostic global minimum of the objective
    when known; otherwise ``lower_bound`` is the reference for regret.
    ``kernel`` holds fixed hyperparameters for runs that skip fitting.
    """

    name: str
    dim: int
    objective: Callable
    constraints: tuple = ()
    true_min: float | None = None
    lower_bound: float | None = None
    kernel: KernelParams | None = None
    info: dict = field(default_factory=dict)


@functools.lru_cache(maxsize=None)
def benchmark(name: str) -> fns.BenchmarkSpec:
    """Normalized benchmark with its refined minimum attached."""
    if name == "hartmann6":
        _, raw_min = fns.hartmann6_minimum()
        spec = fns.BenchmarkSpec("hartmann6", 6, fns.hartmann6, raw_min=raw_min)
    elif name == "forrester":
        _, raw_min = fns.forrester_minimum()
        spec = fns.BenchmarkSpec("forrester", 1, fns.forrester, raw_min=raw_min)
    elif m := re.fullmatch(r"michalewicz(\d+)", name):
        dim = int(m.group(1))
        _, raw_min = fns.michalewicz_minimum(dim)
        spec = fns.BenchmarkSpec(name, dim, fns.michalewicz, raw_min=raw_min)
    else:
        raise KeyError(f"unknown benchmark {name!r}")
    return fns.normalize_benchmark(spec, NORM_SAMPLES, NORM_SEED)


@functools.lru_cache(maxsize=32)
def build_problem(name: str, constraint: str | None = None, seed: int = 0) -> Problem:
    """Resolve a problem by name.

    ``gp<D>`` draws objective and constraint from a GP prior using ``seed``;
    the constraint is attached when ``constraint == "gp"``. Benchmarks accept
    ``constraint == "sinprod"``.
    """
    if m := re.fullmatch(r"gp(\d+)", name):
        dim = int(m.group(1))
        kernel = KernelParams.isotropic(dim, 0.1, 1.0)
        obj, con = gp_sample_problem(kernel, dim, seed=seed)
        if constraint not in (None, "gp"):
            raise ValueError(f"GP-sample problems take constraint 'gp', not {constraint!r}")
        cons = (con,) if constraint == "gp" else ()
        return Problem(name, dim, obj, cons, None, LOWER_BOUND, kernel, {"seed": seed})

    spec = benchmark(name)
    if constraint is None:
        cons = ()
    elif constraint == "sinprod":
        cons = (functools.partial(fns.sinprod_constraint, dim=spec.dim),)
    else:
        raise ValueError(f"unknown constraint {constraint!r} for {name}")
    info = {"norm_mean": spec.mean, "norm_std": spec.std, "norm_seed": spec.norm_seed,
            "norm_samples": NORM_SAMPLES, "raw_min": spec.raw_min}
    return Problem(name, spec.dim, spec, cons, spec.true_min, None, None, info)
