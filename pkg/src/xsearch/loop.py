"""Sequential optimization loops: Xs, XsF and the baseline acquisitions.

A run is fully determined by its :class:`RunConfig`. Every random draw is
seeded from ``(seed, t, purpose)`` so a record can be re-derived bit for bit
from its config echo.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from xsearch import acquisition as acq
from xsearch.budget import Branch, BudgetState, ControllerConfig, select_branch, update_rho
from xsearch.extremes import fit_frechet, sample_min
from xsearch.gp import Dataset, GPModel, HyperPriors, KernelParams, fit_hyperparameters
from xsearch.optimize import INFEASIBLE, maximize_constrained, maximize_unconstrained, sobol_points

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ALGORITHMS = ("xs", "xsf", "ei", "pi", "ucb", "eic", "eic_hard")
CONSTRAINED = ("xsf", "eic", "eic_hard")
INIT = "INIT"

# purposes for per-iteration seed derivation
_FIT_OBJ, _FIT_CON, _MIN_SAMPLES, _ACQ_OPT, _RECOMMEND = range(5)


@dataclass(frozen=True)
class RunConfig:
    """Serializable description of one run.

    ``fit_hyper=None`` means: fit unless the problem carries fixed kernel
    parameters. ``hyper_penalty`` weights a log-space pull of the fitted
    hyperparameters toward the centre of their boxes (0 gives bounded ML). ``stop_on_depletion=None`` means: on for EIC variants, off
    otherwise.
    """

    algo: str
    problem: str
    T: int
    B: int = 0
    constraint: str | None = None
    problem_seed: int = 0
    S: int = 20
    restarts: int = 10
    seed: int = 0
    fit_hyper: bool | None = None
    hyper_restarts: int = 5
    hyper_penalty: float = 0.0
    n_init: int = 1
    init_seed: int = 0
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    stop_on_depletion: bool | None = None
    frechet_grid: int = 2000
    derivative_variance: str = "posterior"
    raw_samples: int = 512
    max_calls: int = 200

    def __post_init__(self):
        if self.algo not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algo!r}; choose from {ALGORITHMS}")
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if self.B < 0:
            raise ValueError("B must be non-negative")
        if self.B > self.T:
            raise ValueError("failure budget B may not exceed the evaluation budget T")
        if self.S < 1 or self.restarts < 1 or self.n_init < 1:
            raise ValueError("S, restarts and n_init must be positive")

    @property
    def stops_on_depletion(self) -> bool:
        if self.stop_on_depletion is None:
            return self.algo in ("eic", "eic_hard")
        return self.stop_on_depletion

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["controller"] = dataclasses.asdict(self.controller)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        d["controller"] = ControllerConfig(**d.get("controller", {}))
        return cls(**d)


def _seed(cfg: RunConfig, t: int, purpose: int) -> int:
    return int(np.random.SeedSequence([cfg.seed, t, purpose]).generate_state(1)[0])


def _is_failure(g: list[float]) -> bool:
    return any(v > 0 for v in g)


def _evaluate(problem, x: np.ndarray) -> tuple[float, list[float]]:
    y = float(np.asarray(problem.objective(x[None, :]))[0])
    g = [float(np.asarray(c(x[None, :]))[0]) for c in problem.constraints]
    if not math.isfinite(y) or not all(math.isfinite(v) for v in g):
        raise FloatingPointError(f"non-finite evaluation at {x.tolist()}")
    return y, g


class _Models:
    """Datasets plus current hyperparameters for objective and constraints."""

    def __init__(self, cfg: RunConfig, problem):
        self.cfg = cfg
        self.dim = problem.dim
        self.fit = cfg.fit_hyper if cfg.fit_hyper is not None else problem.kernel is None
        default = problem.kernel or KernelParams.isotropic(self.dim, 0.2, 1.0)
        n_con = len(problem.constraints)
        self.data = [Dataset.empty(self.dim) for _ in range(n_con + 1)]
        self.params = [default] * (n_con + 1)
        self.priors = HyperPriors(penalty=cfg.hyper_penalty)

    def append(self, x, y: float, g: list[float]) -> None:
        self.data = [d.append(x, v) for d, v in zip(self.data, [y, *g])]

    def refresh(self, t: int) -> tuple[GPModel, list[GPModel]]:
        if self.fit:
            self.params = [
                fit_hyperparameters(d, self.priors, self.cfg.hyper_restarts,
                                    _seed(self.cfg, t, _FIT_OBJ if i == 0 else _FIT_CON + 10 * i),
                                    initial=p)
                for i, (d, p) in enumerate(zip(self.data, self.params))
            ]
        models = [GPModel(d, p, self.cfg.derivative_variance)
                  for d, p in zip(self.data, self.params)]
        return models[0], models[1:]


def _safe_incumbent(rows: list[dict]) -> float | None:
    safe = [r["y"] for r in rows if not r["failure"]]
    return min(safe) if safe else None


def _propose(cfg: RunConfig, t: int, ctx: acq.AcquisitionContext, rho: float | None,
             state: BudgetState | None, frechet_grid: np.ndarray):
    """Return ``(x, acquisition value, branch, info)`` for one iteration."""
    dim = ctx.dim
    opt = dict(restarts=cfg.restarts, seed=_seed(cfg, t, _ACQ_OPT),
               raw_samples=cfg.raw_samples, max_calls=cfg.max_calls)
    info: dict[str, Any] = {}

    if cfg.algo in ("xs", "xsf"):
        frechet = fit_frechet(ctx.objective, frechet_grid)
        ctx.min_samples = sample_min(frechet, cfg.S, _seed(cfg, t, _MIN_SAMPLES)).samples
        info["frechet"] = {"eta": frechet.eta, "s": frechet.s, "q": frechet.q}

    if cfg.algo == "xs":
        x, v = maximize_unconstrained(lambda z: acq.alpha_x(ctx, z), dim, **opt)
        return x, v, None, info

    if cfg.algo == "xsf":
        branch = select_branch(state, cfg.controller, ctx.safe_incumbent is not None)
        if branch is Branch.SAFE:
            x, v = maximize_constrained(
                lambda z: acq.alpha_x(ctx, z), lambda z: acq.constraint_satisfaction_prob(ctx, z),
                rho, dim, log_feasibility=lambda z: acq.log_constraint_satisfaction_prob(ctx, z),
                **opt)
            if x is not INFEASIBLE:
                return x, v, branch.value, info
            info["infeasible_fallback"] = True
        x, v = maximize_unconstrained(lambda z: acq.risky_objective(ctx, z), dim, **opt)
        return x, v, branch.value, info

    if cfg.algo == "eic_hard" and ctx.safe_incumbent is not None:
        x, v = maximize_constrained(
            lambda z: acq.eic_hard_objective(ctx, z),
            lambda z: acq.constraint_satisfaction_prob(ctx, z), ctx.rho, dim,
            log_feasibility=lambda z: acq.log_constraint_satisfaction_prob(ctx, z), **opt)
        if x is not INFEASIBLE:
            return x, v, None, info
        info["infeasible_fallback"] = True

    fn = {"ei": acq.ei, "pi": acq.pi, "ucb": acq.ucb, "eic": acq.eic, "eic_hard": acq.eic}
    x, v = maximize_unconstrained(lambda z: fn[cfg.algo](ctx, z), dim, **opt)
    return x, v, None, info


def recommend(objective: GPModel, constraints: list[GPModel], rho_safe: float,
              restarts: int = 10, seed: int = 0, raw_samples: int = 512,
              max_calls: int = 200) -> tuple[np.ndarray, bool]:
    """argmin of the posterior mean subject to ``phi(x) >= rho_safe``.

    Returns ``(x, fallback)``; ``fallback`` is true when no point met the
    threshold and the most probably safe point was returned instead.
    """
    ctx = acq.AcquisitionContext(objective, list(constraints))
    dim = objective.dim
    opt = dict(restarts=restarts, seed=seed, raw_samples=raw_samples, max_calls=max_calls)

    def neg_mean(z):
        return -objective.predict(z)[0]

    if not constraints:
        return maximize_unconstrained(neg_mean, dim, **opt)[0], False
    x, _ = maximize_constrained(
        neg_mean, lambda z: acq.constraint_satisfaction_prob(ctx, z), rho_safe, dim,
        log_feasibility=lambda z: acq.log_constraint_satisfaction_prob(ctx, z), **opt)
    if x is not INFEASIBLE:
        return x, False
    x, _ = maximize_unconstrained(lambda z: acq.log_constraint_satisfaction_prob(ctx, z), dim,
                                  **opt)
    return x, True


def run(cfg: RunConfig, problem=None) -> dict:
    """Execute one run and return its record as a JSON-ready dict."""
    if problem is None:
        from xsearch.bench.problems import build_problem
        problem = build_problem(cfg.problem, cfg.constraint, cfg.problem_seed)
    n_con = len(problem.constraints)
    if cfg.algo in CONSTRAINED and n_con == 0:
        raise ValueError(f"{cfg.algo} needs at least one constraint")
    if cfg.algo not in CONSTRAINED and n_con:
        raise ValueError(f"{cfg.algo} is unconstrained but the problem has constraints")

    dim = problem.dim
    models = _Models(cfg, problem)
    init = sobol_points(cfg.n_init, dim, cfg.init_seed)
    frechet_grid = sobol_points(cfg.frechet_grid, dim, cfg.seed)
    ctrl = cfg.controller
    state = BudgetState.initial(cfg.B, cfg.T, ctrl) if n_con else None

    rows: list[dict] = []
    record: dict[str, Any] = {"schema_version": SCHEMA_VERSION, "config": cfg.to_dict(),
                              "problem_info": {k: v for k, v in problem.info.items()},
                              "rows": rows, "aborted": None, "terminated_at": None}
    failures = 0
    last_failure = False
    for t in range(1, cfg.T + 1):
        rho = None
        if state is not None:
            state = update_rho(state, ctrl, last_failure)
            rho = state.rho
        try:
            if t <= cfg.n_init:
                x, value, branch, info = init[t - 1], float("nan"), INIT, {}
            else:
                obj_model, con_models = models.refresh(t)
                ctx = acq.AcquisitionContext(obj_model, con_models,
                                             safe_incumbent=_safe_incumbent(rows),
                                             rho=acq.EIC_RHO)
                x, value, branch, info = _propose(cfg, t, ctx, rho, state, frechet_grid)
            x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
            y, g = _evaluate(problem, x)
        except Exception as exc:  # partial record, flagged
            log.error("run aborted at t=%d: %s", t, exc)
            record["aborted"] = {"t": t, "error": f"{type(exc).__name__}: {exc}"}
            break
        failure = _is_failure(g)
        overrun = failure and failures >= cfg.B
        failures += int(failure)
        models.append(x, y, g)
        rows.append({
            "t": t, "x": x.tolist(), "y": y, "g": g, "failure": failure,
            "rho": rho, "branch": branch, "delta_b": max(cfg.B - failures, 0),
            "acq_value": None if not math.isfinite(value) else float(value),
            "overrun": overrun, "hyper": [p.to_dict() for p in models.params], **info,
        })
        last_failure = failure
        if n_con and cfg.stops_on_depletion and failures >= cfg.B and failure:
            record["terminated_at"] = t
            break

    record["overrun"] = sum(r["overrun"] for r in rows)
    if rows:
        obj_model, con_models = models.refresh(cfg.T + 1)
        x_rec, fallback = recommend(obj_model, con_models, ctrl.rho_safe, cfg.restarts,
                                    _seed(cfg, cfg.T + 1, _RECOMMEND), cfg.raw_samples,
                                    cfg.max_calls)
        record["recommendation"] = {"x": np.asarray(x_rec).tolist(), "fallback": fallback}
    else:
        record["recommendation"] = None

    from xsearch.bench.metrics import compute_metrics
    record["metrics"] = compute_metrics(record, problem.true_min, problem.lower_bound)
    return record


def run_xs(cfg: RunConfig, problem=None) -> dict:
    if cfg.algo != "xs":
        cfg = dataclasses.replace(cfg, algo="xs")
    return run(cfg, problem)


def run_xsf(cfg: RunConfig, problem=None) -> dict:
    if cfg.algo != "xsf":
        cfg = dataclasses.replace(cfg, algo="xsf")
    return run(cfg, problem)
