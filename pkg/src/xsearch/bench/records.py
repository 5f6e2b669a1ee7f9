"""Run-record files, replay and cross-seed summaries."""

from __future__ import annotations

import csv
import json
import math
from collections import defaultdict
from pathlib import Path

import numpy as np

from xsearch.bench.metrics import best_safe_trace
from xsearch.loop import SCHEMA_VERSION, RunConfig, run

SUMMARY_COLUMNS = ("algo", "iter", "median_regret", "p25", "p75", "median_omega")


def record_name(record: dict) -> str:
    c = record["config"]
    con = f"_{c['constraint']}" if c.get("constraint") else ""
    return f"{c['algo']}_{c['problem']}{con}_seed{c['seed']}.json"


def save_record(record: dict, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(record, indent=1, allow_nan=True))
    return path


def load_record(path: str | Path) -> dict:
    record = json.loads(Path(path).read_text())
    version = record.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema_version {version!r}")
    return record


def _canonical(record: dict) -> str:
    keys = ("config", "rows", "recommendation", "metrics", "aborted", "terminated_at", "overrun")
    return json.dumps({k: record.get(k) for k in keys}, sort_keys=True, allow_nan=True)


def replay(record: dict) -> tuple[bool, dict]:
    """Re-run from the config echo; true when the result is identical."""
    fresh = json.loads(json.dumps(run(RunConfig.from_dict(record["config"])), allow_nan=True))
    return _canonical(fresh) == _canonical(record), fresh


def regret_curve(record: dict) -> np.ndarray:
    """Per-iteration best-safe regret over the configured T; inf until defined.

    Early-terminated runs carry their last value forward.
    """
    horizon = record["config"]["T"]
    ref = record["metrics"]["reference"] or 0.0
    trace = [math.inf if v is None else v - ref for v in best_safe_trace(record["rows"])]
    last = trace[-1] if trace else math.inf
    trace += [last] * (horizon - len(trace))
    return np.asarray(trace[:horizon])


def omega_curve(record: dict) -> np.ndarray:
    """Running percentage of safe evaluations, ``100 * N_safe(<= t) / t``."""
    horizon = record["config"]["T"]
    safe = np.zeros(horizon)
    for r in record["rows"]:
        safe[r["t"] - 1] = 0.0 if r["failure"] else 1.0
    return 100.0 * np.cumsum(safe) / np.arange(1, horizon + 1)


def summarize(records: list[dict]) -> list[dict]:
    """Median and quartiles of regret plus median Omega per algorithm and iteration.

    Quartiles use order statistics so undefined (infinite) regrets stay
    well defined and the curves remain monotone.
    """
    groups: dict[str, list[dict]] = defaultdict(list)
    for rec in records:
        groups[rec["config"]["algo"]].append(rec)
    out = []
    for algo in sorted(groups):
        recs = groups[algo]
        horizons = {r["config"]["T"] for r in recs}
        if len(horizons) != 1:
            raise ValueError(f"{algo}: records disagree on T: {sorted(horizons)}")
        reg = np.vstack([regret_curve(r) for r in recs])
        om = np.vstack([omega_curve(r) for r in recs])
        med = np.percentile(reg, 50, axis=0, method="lower")
        p25 = np.percentile(reg, 25, axis=0, method="lower")
        p75 = np.percentile(reg, 75, axis=0, method="higher")
        med_om = np.median(om, axis=0)
        for t in range(reg.shape[1]):
            out.append({"algo": algo, "iter": t + 1, "median_regret": float(med[t]),
                        "p25": float(p25[t]), "p75": float(p75[t]),
                        "median_omega": float(med_om[t])})
    return out


def write_summary(rows: list[dict], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    return path


def load_records(directory: str | Path) -> list[dict]:
    return [load_record(p) for p in sorted(Path(directory).glob("*.json"))]
