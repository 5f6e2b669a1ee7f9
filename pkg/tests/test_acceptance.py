"""Acceptance criteria, one test per criterion.

Each test prints a single ``criterion N: PASS/FAIL`` line (repeated in the
terminal summary) before asserting. The long-running benchmark criteria share
one set of run records; set ``XSEARCH_ACCEPTANCE_DIR`` to keep them.
"""

import math
import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import norm

from conftest import record_criterion
from xsearch.bench.records import record_name, save_record
from xsearch.budget import BudgetState, ControllerConfig, update_rho
from xsearch.cli import main as cli_main
from xsearch.crossings import (
    CrossingQuery,
    crossing_intensity_1d,
    crossing_intensity_nd,
    mc_crossing_oracle,
    rice_upcrossings,
)
from xsearch.extremes import compare_from_moments, fit_frechet, sample_min
from xsearch.gp import (
    VIRTUAL_JITTER,
    Dataset,
    GPModel,
    KernelParams,
    cholesky_jittered,
    se_kernel,
)
from xsearch.loop import RunConfig, run

pytestmark = pytest.mark.acceptance

GP_SEEDS_BUDGET = 30
GP_SEEDS_OMEGA = 10
HARTMANN_SEEDS = 10


def random_model(rng, dim, n_max=6):
    """A model whose observations are a draw from its own prior."""
    n = int(rng.integers(1, n_max + 1))
    params = KernelParams(tuple(rng.uniform(0.1, 0.6, dim)), float(rng.uniform(0.5, 2.0)))
    xs = rng.random((n, dim))
    k = se_kernel(params, xs, xs) + params.noise_variance * np.eye(n)
    ys = np.linalg.cholesky(k) @ rng.standard_normal(n)
    return GPModel(Dataset(xs, ys, dim), params)


def random_level(rng, model, x):
    """A level between four posterior stddevs below and one above the mean at x."""
    mean, var = model.predict(np.atleast_2d(x))
    return float(mean[0] + math.sqrt(var[0]) * rng.uniform(-4.0, 1.0))


# -- criterion 1 -------------------------------------------------------------

def test_criterion_1_rice_consistency():
    start = time.perf_counter()
    grid = np.linspace(0.0, 1.0, 4096)[:, None]
    worst = 0.0
    details = []
    for ell in (0.05, 0.1, 0.2):
        params = KernelParams((ell,), 1.0)
        chol, _ = cholesky_jittered(se_kernel(params, grid, grid), 1.0)
        paths = chol @ np.random.default_rng(int(ell * 1000)).standard_normal((4096, 2000))
        for u in (0.0, 1.0):
            counts = ((paths[:-1] < u) & (paths[1:] >= u)).sum(0).mean()
            rel = abs(counts / rice_upcrossings(params, u) - 1.0)
            worst = max(worst, rel)
            details.append(f"l={ell},u={u}:{rel:.3%}")
    elapsed = time.perf_counter() - start
    passed = worst < 0.05 and elapsed < 120
    record_criterion(1, passed, f"max rel err {worst:.3%} (< 5%), {elapsed:.0f}s; "
                     + " ".join(details))
    assert passed


# -- criterion 2 -------------------------------------------------------------

def quadrature_intensity(model, x, u):
    mean, var = model.predict([[x]])
    grad = model.gradient_posterior_with_virtual([x], u)
    m, s = float(grad.mean[0]), float(grad.stddev[0])
    lo, hi = m - 40 * s, m + 40 * s
    cuts = [lo, 0.0, hi] if lo < 0 < hi else [lo, hi]
    inner = sum(quad(lambda d: abs(d) * norm.pdf(d, m, s), a, b, epsabs=0, epsrel=1e-12)[0]
                for a, b in zip(cuts[:-1], cuts[1:]))
    return norm.pdf(u, mean[0], math.sqrt(var[0])) * inner


def test_criterion_2_intensity_oracles():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst_rel = 0.0
    for _ in range(100):
        model = random_model(rng, 1)
        x = float(rng.random())
        u = random_level(rng, model, [x])
        got = crossing_intensity_1d(CrossingQuery(u, np.array([x]), model))
        ref = quadrature_intensity(model, x, u)
        worst_rel = max(worst_rel, abs(got / ref - 1.0))
    worst_z = 0.0
    for k in range(50):
        model = random_model(rng, 2)
        x = rng.random(2)
        q = CrossingQuery(random_level(rng, model, x), x, model)
        est, se = mc_crossing_oracle(q, 1_000_000, seed=k)
        mean, var = model.predict(q.x)
        expected = crossing_intensity_nd(q) / norm.pdf(q.u, mean[0], math.sqrt(var[0]))
        worst_z = max(worst_z, abs(est - expected) / se)
    elapsed = time.perf_counter() - start
    passed = worst_rel < 1e-6 and worst_z < 3.0 and elapsed < 300
    record_criterion(2, passed, f"1D max rel err {worst_rel:.2e} (< 1e-6); "
                     f"2D max |z| {worst_z:.2f} (< 3); {elapsed:.0f}s")
    assert passed


# -- criterion 3 -------------------------------------------------------------

def extended_mean_gradient(model, x, u, h=1e-5):
    params, data = model.params, model.data
    ext_x = np.vstack([data.inputs, x[None, :]])
    ext_y = np.append(data.outputs, u)
    noise = np.full(len(ext_y), params.noise_variance)
    noise[-1] = VIRTUAL_JITTER * params.signal_variance
    w = np.linalg.solve(se_kernel(params, ext_x, ext_x) + np.diag(noise), ext_y)
    out = np.empty(len(x))
    for j in range(len(x)):
        e = np.zeros(len(x))
        e[j] = h
        hi = se_kernel(params, (x + e)[None, :], ext_x) @ w
        lo = se_kernel(params, (x - e)[None, :], ext_x) @ w
        out[j] = (hi[0] - lo[0]) / (2 * h)
    return out


def test_criterion_3_gradient_check():
    rng = np.random.default_rng(3)
    worst = 0.0
    for k in range(100):
        dim = (1, 2, 4)[k % 3]
        model = random_model(rng, dim)
        x = rng.random(dim)
        u = random_level(rng, model, x)
        got = model.gradient_posterior_with_virtual(x, u).mean
        fd = extended_mean_gradient(model, x, u)
        # floor at 1e-6 of the prior gradient scale: below it differences are rounding noise
        prior_scale = math.sqrt(model.params.signal_variance) / min(model.params.lengthscales)
        scale = max(np.max(np.abs(fd)), 1e-6 * prior_scale)
        worst = max(worst, float(np.max(np.abs(got - fd)) / scale))
    passed = worst < 1e-4
    record_criterion(3, passed, f"max rel err {worst:.2e} (< 1e-4) over 100 configs, D in 1/2/4")
    assert passed


# -- criterion 4 -------------------------------------------------------------

def gumbel_setup(ell, seed):
    """20 prior-sampled observations on [0, 1] and the posterior on 200 grid points."""
    params = KernelParams((ell,), 1.0)
    rng = np.random.default_rng(seed)
    obs_x = rng.random((20, 1))
    grid = np.linspace(0.0, 1.0, 200)[:, None]
    pts = np.vstack([obs_x, grid])
    chol, _ = cholesky_jittered(se_kernel(params, pts, pts), 1.0)
    draw = chol @ rng.standard_normal(len(pts))
    y = draw[:20] + math.sqrt(params.noise_variance) * rng.standard_normal(20)
    model = GPModel(Dataset(obs_x, y, 1), params)
    mean, var = model.predict(grid)
    return mean, np.sqrt(var), float(y.min())


def test_criterion_4_frechet_support_and_gumbel():
    rng = np.random.default_rng(4)
    exceed, total = 0, 0
    for k in range(20):
        model = random_model(rng, int(rng.integers(1, 4)), n_max=15)
        grid = rng.random((500, model.dim))
        params = fit_frechet(model, grid)
        draws = sample_min(params, 5000, seed=k).samples
        exceed += int(np.sum(draws > params.eta))
        total += len(draws)
    # setup fixed in advance: lengthscale 0.1, setup seed 0
    mean, std, eta = gumbel_setup(0.1, 0)
    fre_pct, gum_pct = compare_from_moments(mean, std, eta, 100, seed=0)
    ensemble = [compare_from_moments(*gumbel_setup(0.1, s), 1, seed=s)[1] for s in range(100)]
    passed = exceed == 0 and total == 100_000 and fre_pct == 0.0 and 0.1 <= gum_pct <= 5.0
    record_criterion(4, passed, f"Frechet exceed {exceed}/{total}; Gumbel exceed {gum_pct:.2f}% "
                     f"(in [0.1, 5]); Gumbel over 100 setups {np.mean(ensemble):.2f} "
                     f"+- {np.std(ensemble):.2f}%")
    assert passed


# -- criterion 5 -------------------------------------------------------------

def hand_trajectory(failures, budget, horizon, cfg):
    """Independent transcription of the control law and its overrides."""
    z_s, z_r = norm.ppf(cfg.rho_safe), norm.ppf(cfg.rho_risk)
    z, db, dt = norm.ppf(cfg.rho_0), budget, horizon
    rhos = []
    for f in failures:
        if db == 0:
            z = z_s
        elif db > dt:
            z = z_r
        else:
            z = z + (z_s - z) * f / db + (z_r - z) * db / (2 * dt)
        rhos.append(norm.cdf(z))
        db -= int(f and db > 0)
        dt -= 1
    return np.array(rhos)


def test_criterion_5_controller_trajectory():
    cfg = ControllerConfig()
    script = [False, True, False, False, True, False, True, False, False, False,
              True, False, False, True, True, False, False, False, False, False]
    state = BudgetState.initial(5, len(script), cfg)
    got = []
    for f in script:
        state = update_rho(state, cfg, f)
        got.append(state.rho)
    err = float(np.max(np.abs(np.array(got) - hand_trajectory(script, 5, len(script), cfg))))
    example = update_rho(BudgetState(5, 50, 0.0), cfg, True).rho
    safe = update_rho(BudgetState(0, 10, -1.0), cfg, False).rho
    risky = update_rho(BudgetState(8, 5, 1.0), cfg, False).rho
    passed = (err < 1e-10 and abs(example - norm.cdf(0.34895)) < 1e-4
              and safe == pytest.approx(0.99, abs=1e-12) and risky == pytest.approx(0.01, abs=1e-12))
    record_criterion(5, passed, f"trajectory max err {err:.1e} (< 1e-10); worked example "
                     f"{example:.4f}; overrides -> {safe:.4f}/{risky:.4f}")
    assert passed


# -- criteria 6 to 9: benchmark runs -------------------------------------------

@pytest.fixture(scope="module")
def record_dir(tmp_path_factory):
    custom = os.environ.get("XSEARCH_ACCEPTANCE_DIR")
    if custom:
        path = Path(custom)
        path.mkdir(parents=True, exist_ok=True)
        return path
    return tmp_path_factory.mktemp("acceptance_runs")


class RunCache:
    def __init__(self, directory):
        self.directory = directory
        self.records: dict[RunConfig, dict] = {}
        self.paths: list[Path] = []
        self.seconds: dict[str, float] = {}

    def get(self, cfg, tag):
        if cfg not in self.records:
            start = time.perf_counter()
            rec = run(cfg)
            self.seconds[tag] = self.seconds.get(tag, 0.0) + time.perf_counter() - start
            sub = self.directory / cfg.problem / cfg.algo
            sub.mkdir(parents=True, exist_ok=True)
            self.paths.append(save_record(rec, sub / record_name(rec)))
            self.records[cfg] = rec
        return self.records[cfg]


@pytest.fixture(scope="module")
def runs(record_dir):
    return RunCache(record_dir)


def gp_config(algo, seed):
    return RunConfig(algo, "gp3", T=60, B=10, constraint="gp", problem_seed=seed, seed=seed)


def depletion_median(records):
    return float(np.median([rec["metrics"]["depletion_iter"] for rec in records]))


def omega_median(records):
    return float(np.median([rec["metrics"]["omega"] for rec in records]))


def test_criterion_6_budget_compliance(runs):
    # EIC is the product form EI * P(feasible), stopped when the budget is spent;
    # the hard-threshold variant is run alongside and reported, not judged
    xsf = [runs.get(gp_config("xsf", s), "c6") for s in range(GP_SEEDS_BUDGET)]
    eic = [runs.get(gp_config("eic", s), "c6") for s in range(GP_SEEDS_BUDGET)]
    hard = [runs.get(gp_config("eic_hard", s), "c6_hard") for s in range(GP_SEEDS_BUDGET)]
    within = all(sum(r["failure"] and not r["overrun"] for r in rec["rows"]) <= 10 for rec in xsf)
    complete = all(len(rec["rows"]) == 60 and rec["aborted"] is None for rec in xsf)
    d_xsf, d_eic, d_hard = depletion_median(xsf), depletion_median(eic), depletion_median(hard)
    overruns = sum(rec["overrun"] for rec in xsf)
    elapsed = runs.seconds["c6"]
    passed = within and complete and d_xsf > d_eic and elapsed < 1800
    record_criterion(6, passed, f"budgeted failures <= B in all {len(xsf)} XsF runs: {within}; "
                     f"median depletion XsF {d_xsf} vs EIC {d_eic} (T+1 = never; hard-threshold "
                     f"EIC {d_hard}); post-depletion overruns {overruns}; {elapsed:.0f}s")
    assert passed


def test_criterion_7_unconstrained_regret(runs):
    def cfg(algo, seed):
        return RunConfig(algo, "hartmann6", T=100, seed=seed)

    xs = [runs.get(cfg("xs", s), "c7")["metrics"]["regret"] for s in range(HARTMANN_SEEDS)]
    ei = [runs.get(cfg("ei", s), "c7")["metrics"]["regret"] for s in range(HARTMANN_SEEDS)]
    med_xs, med_ei = float(np.median(xs)), float(np.median(ei))
    elapsed = runs.seconds["c7"]
    passed = med_xs <= med_ei and med_xs < 0.3 and elapsed < 3600
    record_criterion(7, passed, f"median regret Xs {med_xs:.3f} vs EI {med_ei:.3f} "
                     f"(need Xs <= EI and Xs < 0.3); {elapsed:.0f}s")
    assert passed


def test_criterion_8_safe_visit_rate(runs):
    start = time.perf_counter()
    xsf = [runs.get(gp_config("xsf", s), "c8") for s in range(GP_SEEDS_OMEGA)]
    eic = [runs.get(gp_config("eic", s), "c8") for s in range(GP_SEEDS_OMEGA)]
    hard = [runs.get(gp_config("eic_hard", s), "c8") for s in range(GP_SEEDS_OMEGA)]
    om_xsf, om_eic, om_hard = omega_median(xsf), omega_median(eic), omega_median(hard)
    executed = float(np.median([100.0 * r["metrics"]["n_safe"] / len(r["rows"]) for r in eic]))
    elapsed = time.perf_counter() - start
    passed = om_xsf >= om_eic
    record_criterion(8, passed, f"median Omega XsF {om_xsf:.1f} vs EIC {om_eic:.1f} "
                     f"(EIC over executed rows only {executed:.1f}; hard-threshold EIC "
                     f"{om_hard:.1f}); records shared with criterion 6, {elapsed:.0f}s extra")
    assert passed


def test_criterion_9_replay(runs):
    paths = [str(p) for p in runs.paths]
    if not paths:
        pytest.skip("criteria 6 to 8 produced no records in this session")
    start = time.perf_counter()
    code = cli_main(["replay", *paths])
    elapsed = time.perf_counter() - start
    passed = code == 0
    record_criterion(9, passed, f"replay exit code {code} over {len(paths)} records; "
                     f"{elapsed:.0f}s")
    assert passed
