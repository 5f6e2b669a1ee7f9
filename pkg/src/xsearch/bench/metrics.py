"""Regret and safe-visit metrics computed purely from a run record."""

from __future__ import annotations

import math

UNDEFINED = None


def best_safe_trace(rows: list[dict]) -> list[float | None]:
    """Running best objective among safe rows; None until the first safe row."""
    best, trace = math.inf, []
    for r in rows:
        if not r["failure"] and r["y"] < best:
            best = r["y"]
        trace.append(best if math.isfinite(best) else None)
    return trace


def compute_metrics(record: dict, true_min: float | None,
                    lower_bound: float | None = None) -> dict:
    """Metrics block for a finished record.

    ``regret`` is the best safe observation minus ``true_min``; with no known
    minimum it is the gap to ``lower_bound`` and ``regret_kind`` says so.
    ``omega`` divides the safe count by the configured T, so runs that stop
    early are charged for the evaluations they did not make.
    """
    rows = record["rows"]
    horizon = record["config"]["T"]
    budget = record["config"]["B"]
    trace = best_safe_trace(rows)
    if true_min is not None:
        ref, kind = true_min, "true_min"
    elif lower_bound is not None:
        ref, kind = lower_bound, "lower_bound_gap"
    else:
        ref, kind = None, "best_value"
    best = trace[-1] if trace else None
    if best is None:
        regret = UNDEFINED
    else:
        regret = best - ref if ref is not None else best
    n_safe = sum(not r["failure"] for r in rows)
    failures = sum(r["failure"] for r in rows)
    depletion = 0 if budget == 0 else None
    seen = 0
    for r in rows:
        seen += r["failure"]
        if depletion is None and seen >= budget:
            depletion = r["t"]
    return {
        "regret": regret,
        "regret_kind": kind,
        "reference": ref,
        "omega": 100.0 * n_safe / horizon,
        "n_safe": n_safe,
        "failures": failures,
        "overrun": sum(r["overrun"] for r in rows),
        "best_safe_trace": trace,
        "depletion_iter": depletion if depletion is not None else horizon + 1,
    }
