import numpy as np
import pytest

from xsearch import acquisition as acq
from xsearch.bench.metrics import compute_metrics
from xsearch.bench.problems import Problem, build_problem
from xsearch.budget import Branch
from xsearch.gp import Dataset, GPModel, KernelParams
from xsearch.loop import INIT, RunConfig, recommend, run, run_xs, run_xsf


def islands_objective(x):
    x = np.asarray(x)[:, 0]
    return 1.0 - np.exp(-((x - 0.4) / 0.08) ** 2) - 2.0 * np.exp(-((x - 0.85) / 0.06) ** 2)


def islands_constraint(x):
    # safe on [0.3, 0.5] and [0.75, 0.95]; the initial point 0.41 lies in the first
    x = np.asarray(x)[:, 0]
    return np.minimum(np.abs(x - 0.4), np.abs(x - 0.85)) - 0.1


ISLANDS = Problem("islands", 1, islands_objective, (islands_constraint,),
                  true_min=float(islands_objective(np.array([[0.85]]))[0]))


def always_safe(x):
    return -np.ones(len(x))


SAFE_FORRESTER = Problem("forrester_safe", 1, build_problem("forrester").objective,
                         (always_safe,))


def test_config_validation():
    with pytest.raises(ValueError):
        RunConfig("xs", "forrester", T=0)
    with pytest.raises(ValueError):
        RunConfig("xsf", "forrester", T=5, B=6)
    with pytest.raises(ValueError):
        RunConfig("nope", "forrester", T=5)
    cfg = RunConfig("xsf", "forrester", T=5, B=2, constraint="sinprod")
    assert RunConfig.from_dict(cfg.to_dict()) == cfg


def test_algorithm_problem_mismatch():
    with pytest.raises(ValueError):
        run(RunConfig("xsf", "forrester", T=2))
    with pytest.raises(ValueError):
        run(RunConfig("xs", "forrester", T=2, constraint="sinprod"))


def test_single_evaluation():
    rec = run_xs(RunConfig("xs", "forrester", T=1))
    assert len(rec["rows"]) == 1
    assert rec["rows"][0]["branch"] == INIT
    assert rec["rows"][0]["acq_value"] is None


def test_xs_forrester_regret():
    problem = build_problem("forrester")
    grid = np.linspace(0, 1, 100_001)[:, None]
    vals = problem.objective(grid)
    span = vals.max() - vals.min()
    regrets = []
    for seed in range(5):
        rec = run_xs(RunConfig("xs", "forrester", T=30, seed=seed, n_init=3, init_seed=seed))
        best = min(r["y"] for r in rec["rows"])
        regrets.append(best - vals.min())
    assert np.median(regrets) < 0.05 * span


def test_replay_bit_identical():
    cfg = RunConfig("xsf", "forrester", T=8, B=2, constraint="sinprod", seed=3)
    a, b = run(cfg), run(cfg)
    assert [r["x"] for r in a["rows"]] == [r["x"] for r in b["rows"]]
    assert a == b


def test_zero_budget_all_safe():
    rec = run_xsf(RunConfig("xsf", "islands", T=10, B=0), ISLANDS)
    rows = rec["rows"]
    assert not rows[0]["failure"]
    for r in rows:
        assert r["rho"] == pytest.approx(0.99, abs=1e-12)
    assert all(r["branch"] == Branch.SAFE.value for r in rows[1:])


def test_budget_equal_horizon_all_risky():
    rec = run_xsf(RunConfig("xsf", "forrester_safe", T=8, B=8), SAFE_FORRESTER)
    # the override engages once the horizon has shrunk below the budget
    for r in rec["rows"][1:]:
        assert r["rho"] == pytest.approx(0.01, abs=1e-12)
    assert all(r["branch"] == Branch.RISKY.value for r in rec["rows"][1:])


def test_record_invariants():
    cfg = RunConfig("xsf", "islands", T=15, B=3, seed=1)
    rec = run(cfg, ISLANDS)
    rows = rec["rows"]
    assert len(rows) == cfg.T and rec["aborted"] is None
    budgeted = sum(r["failure"] and not r["overrun"] for r in rows)
    assert budgeted <= cfg.B
    if sum(r["failure"] for r in rows) <= cfg.B:
        assert rec["overrun"] == 0
    trace = [v for v in rec["metrics"]["best_safe_trace"] if v is not None]
    assert all(a >= b for a, b in zip(trace, trace[1:]))
    rho_b = cfg.controller.rho_b
    for i, r in enumerate(rows[1:], start=1):
        had_safe = any(not p["failure"] for p in rows[:i])
        if r["branch"] == Branch.SAFE.value:
            assert r["rho"] > rho_b and had_safe
        else:
            assert r["rho"] <= rho_b or not had_safe
    assert compute_metrics(rec, ISLANDS.true_min, None) == rec["metrics"]


def test_aborted_run_is_flagged():
    calls = []

    def flaky(x):
        calls.append(1)
        if len(calls) > 3:
            raise RuntimeError("sensor offline")
        return islands_objective(x)

    rec = run(RunConfig("xs", "flaky", T=6), Problem("flaky", 1, flaky))
    assert rec["aborted"]["t"] == 4
    assert len(rec["rows"]) == 3


@pytest.mark.slow
def test_two_islands_both_visited():
    hits = 0
    for seed in range(10):
        rec = run_xsf(RunConfig("xsf", "islands", T=40, B=5, seed=seed), ISLANDS)
        xs = np.array([r["x"][0] for r in rec["rows"]])
        safe = np.array([not r["failure"] for r in rec["rows"]])
        first = np.any(safe & (np.abs(xs - 0.4) <= 0.1))
        second = np.any(safe & (np.abs(xs - 0.85) <= 0.1))
        hits += bool(first and second)
    assert hits >= 8


def test_recommend_unconstrained_is_mean_argmin():
    xs = np.array([[0.1], [0.3], [0.5], [0.7], [0.9]])
    model = GPModel(Dataset(xs, np.array([0.5, -0.2, -0.8, 0.1, 0.6]), 1), KernelParams((0.15,)))
    x, fallback = recommend(model, [], 0.99)
    grid = np.linspace(0, 1, 20_001)[:, None]
    assert not fallback
    assert abs(x[0] - grid[np.argmin(model.predict(grid)[0]), 0]) < 1e-3


def test_recommend_fallback_to_safest():
    xs = np.array([[0.2], [0.5], [0.8]])
    obj = GPModel(Dataset(xs, np.array([0.0, -1.0, 0.5]), 1), KernelParams((0.2,)))
    con = GPModel(Dataset(xs, np.array([2.0, 3.0, 2.5]), 1), KernelParams((0.2,)))
    ctx = acq.AcquisitionContext(obj, [con])
    grid = np.linspace(0, 1, 2001)[:, None]
    assert acq.constraint_satisfaction_prob(ctx, grid).max() < 0.99
    x, fallback = recommend(obj, [con], 0.99)
    assert fallback
    phi = acq.log_constraint_satisfaction_prob(ctx, x[None, :])[0]
    assert phi >= acq.log_constraint_satisfaction_prob(ctx, grid).max() - 1e-3


def test_recommend_near_known_safe_minimum():
    def objective(x):
        return (np.asarray(x)[:, 0] - 0.2) ** 2

    def constraint(x):
        return np.asarray(x)[:, 0] - 0.6

    problem = Problem("bowl", 1, objective, (constraint,), true_min=0.0)
    rec = run_xsf(RunConfig("xsf", "bowl", T=30, B=3), problem)
    assert abs(rec["recommendation"]["x"][0] - 0.2) < 0.05
    assert not rec["recommendation"]["fallback"]
