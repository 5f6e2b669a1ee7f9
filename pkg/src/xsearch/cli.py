"""Command-line front end: run, replay, summarize, oracle."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from xsearch.budget import ControllerConfig
from xsearch.loop import ALGORITHMS, RunConfig, run

log = logging.getLogger("xsearch")


def _config_for_repeat(args, repeat: int) -> RunConfig:
    seed = args.seed + repeat
    problem_seed = seed if args.problem.startswith("gp") else args.problem_seed
    return RunConfig(
        algo=args.algo, problem=args.problem, constraint=args.constraint, T=args.T, B=args.B,
        problem_seed=problem_seed, S=args.S, restarts=args.restarts, seed=seed,
        fit_hyper=args.fit_hyper, n_init=args.n_init, init_seed=args.init_seed,
        controller=ControllerConfig(args.rho_safe, args.rho_risk, args.rho_0, args.rho_b),
        stop_on_depletion=args.stop_on_depletion,
    )


def _run_and_save(cfg: RunConfig, out: str) -> tuple[str, bool]:
    from xsearch.bench.records import record_name, save_record
    record = run(cfg)
    path = save_record(record, Path(out) / record_name(record))
    return str(path), record["aborted"] is None


def cmd_run(args) -> int:
    from xsearch.bench.records import load_records, summarize, write_summary
    try:
        configs = [_config_for_repeat(args, r) for r in range(args.repeats)]
    except ValueError as exc:
        log.error("invalid configuration: %s", exc)
        return 2
    ok = True
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            results = list(pool.map(_run_and_save, configs, [args.out] * len(configs)))
    else:
        results = [_run_and_save(c, args.out) for c in configs]
    for path, completed in results:
        print(path)
        ok &= completed
    records = [r for r in load_records(args.out) if r["config"]["algo"] == args.algo
               and r["config"]["problem"] == args.problem]
    summary = write_summary(summarize(records), Path(args.out) / "summary.csv")
    print(summary)
    return 0 if ok else 1


def cmd_replay(args) -> int:
    from xsearch.bench.records import load_record, replay
    status = 0
    for path in args.records:
        try:
            same, _ = replay(load_record(path))
        except (ValueError, KeyError, OSError) as exc:
            print(f"{path}: ERROR {exc}")
            status = 1
            continue
        print(f"{path}: {'identical' if same else 'MISMATCH'}")
        status |= 0 if same else 1
    return status


def cmd_summarize(args) -> int:
    from xsearch.bench.records import load_records, summarize, write_summary
    records = load_records(args.directory)
    if not records:
        log.error("no records in %s", args.directory)
        return 1
    out = Path(args.output) if args.output else Path(args.directory) / "summary.csv"
    write_summary(summarize(records), out)
    print(out.read_text(), end="")
    return 0


def _oracles(name: str, seed: int) -> dict:
    from xsearch.bench import functions as fns
    from xsearch.bench.problems import benchmark
    from xsearch.crossings import rice_upcrossings
    from xsearch.gp import KernelParams, sample_prior_on_grid

    out: dict = {}
    if name in ("hartmann6", "all"):
        x, v = fns.hartmann6_minimum(seed=seed)
        out["hartmann6_min"] = {"x": x.tolist(), "value": v}
    if name in ("michalewicz", "all"):
        for dim in (2, 10):
            x, v = fns.michalewicz_minimum(dim)
            out[f"michalewicz{dim}_min"] = {"x": x.tolist(), "value": v}
    if name in ("normalization", "all"):
        for bench in ("hartmann6", "michalewicz10"):
            spec = benchmark(bench)
            fresh = fns.normalize_benchmark(spec, seed=seed + 1)
            out[f"{bench}_norm"] = {"mean": spec.mean, "std": spec.std,
                                    "fresh_mean": fresh.mean, "fresh_std": fresh.std}
    if name in ("rice", "all"):
        grid = np.linspace(0.0, 1.0, 4096)[:, None]
        rows = []
        for ell in (0.05, 0.1, 0.2):
            params = KernelParams((ell,), 1.0)
            counts = {0.0: 0, 1.0: 0}
            for k in range(200):
                f = sample_prior_on_grid(params, grid, seed + k).outputs
                for u in counts:
                    counts[u] += int(np.sum((f[:-1] < u) & (f[1:] >= u)))
            for u, c in counts.items():
                rows.append({"ell": ell, "u": u, "mc": c / 200,
                             "rice": rice_upcrossings(params, u)})
        out["rice"] = rows
    if not out:
        raise KeyError(f"unknown oracle {name!r}")
    return out


def cmd_oracle(args) -> int:
    try:
        print(json.dumps(_oracles(args.name, args.seed), indent=1))
    except KeyError as exc:
        log.error("%s", exc)
        return 2
    return 0


def _tristate(value: str) -> bool | None:
    return {"auto": None, "on": True, "off": False}[value]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="xsearch", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="one algorithm on one problem over several seeds")
    p.add_argument("--algo", choices=ALGORITHMS, required=True)
    p.add_argument("--problem", required=True,
                   help="hartmann6, michalewicz<D>, forrester or gp<D>")
    p.add_argument("--constraint", default=None, help="sinprod (benchmarks) or gp")
    p.add_argument("--T", type=int, required=True)
    p.add_argument("--B", type=int, default=0)
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--seed", type=int, default=0, help="repeat r uses seed + r")
    p.add_argument("--problem-seed", type=int, default=0,
                   help="normalization seed for benchmarks; gp problems use the run seed")
    p.add_argument("--S", type=int, default=20)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--n-init", type=int, default=1)
    p.add_argument("--init-seed", type=int, default=0)
    p.add_argument("--fit-hyper", type=_tristate, default=None, choices=[None, True, False],
                   metavar="{auto,on,off}")
    p.add_argument("--stop-on-depletion", type=_tristate, default=None,
                   choices=[None, True, False], metavar="{auto,on,off}")
    p.add_argument("--rho-safe", type=float, default=0.99)
    p.add_argument("--rho-risk", type=float, default=0.01)
    p.add_argument("--rho-0", type=float, default=0.1)
    p.add_argument("--rho-b", type=float, default=0.5)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("replay", help="re-derive records from their config and compare")
    p.add_argument("records", nargs="+")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("summarize", help="aggregate a directory of records into CSV")
    p.add_argument("directory")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("oracle", help="print reference values computed by the oracles")
    p.add_argument("name", choices=["hartmann6", "michalewicz", "normalization", "rice", "all"])
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
