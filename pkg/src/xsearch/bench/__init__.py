"""Benchmarks, GP-sample problems, metrics and the command-line front end."""

from xsearch.bench.functions import (
    BenchmarkSpec,
    forrester,
    hartmann6,
    michalewicz,
    normalize_benchmark,
    sinprod_constraint,
)
from xsearch.bench.gp_problems import gp_sample_problem
from xsearch.bench.metrics import compute_metrics
from xsearch.bench.problems import Problem, build_problem
from xsearch.bench.records import load_record, replay, save_record, summarize

__all__ = [
    "BenchmarkSpec",
    "Problem",
    "build_problem",
    "compute_metrics",
    "forrester",
    "gp_sample_problem",
    "hartmann6",
    "load_record",
    "michalewicz",
    "normalize_benchmark",
    "replay",
    "save_record",
    "sinprod_constraint",
    "summarize",
]
