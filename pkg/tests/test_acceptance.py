"""End-to-end acceptance criteria, one test per criterion.

Each test prints a ``PASS``/``FAIL`` line (visible with ``pytest -s`` or in the
terminal summary) before asserting, so a failing criterion still reports its
measured numbers.
"""

import math
import time
import warnings
from dataclasses import replace

import numpy as np
import pytest

from mrsde.config import case_config
from mrsde.empirical import EmpiricalMeasure, g0_empirical, wasserstein1
from mrsde.experiments import k_sup_error, rate_study
from mrsde.model import InitialCondition, ModelCoefficients, SimulationConfig, linear_constraint, make_grid, sine_constraint
from mrsde.oracles import AsymptoticOracleWarning, OracleCase, case_iii_times, density_k, k_case_ii, k_case_v, oracle_path, t_star_ou
from mrsde.scheme import InitialConstraintWarning, direct_increment, run

RESULTS = {}
SINE_ROOT = 0.8781775472328504  # root of x + 0.9 sin x = pi/2
FIG1 = dict(beta=2.0, sigma=1.0, x0=1.0, p=0.5)
OU = dict(beta=2.0, a=1.0, sigma=1.0, x0=1.0, p=0.5)
LADDER = [100, 400, 700, 1000, 1600, 2200]


def report(number, title, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'}  criterion {number:>2}: {title} | {detail}"
    RESULTS[number] = line
    print("\n" + line)
    assert ok, line


def seeds_within(config, oracle, tol, seeds):
    errors = [k_sup_error(run(replace(config, seed=s)).k_hat, oracle) for s in seeds]
    return errors, sum(e <= tol for e in errors)


def test_criterion_01_case_i_oracle():
    cfg = case_config("i", N=10000, n=500, **FIG1)
    oracle = oracle_path(cfg.grid, OracleCase.from_config(cfg))
    start = time.perf_counter()
    errors, good = seeds_within(cfg, oracle, 0.05, range(20))
    elapsed = time.perf_counter() - start
    ok = good >= 19 and elapsed <= 10
    report(1, "case i sup|K_hat - K| <= 0.05", ok, f"{good}/20 seeds, worst {max(errors):.4f}, {elapsed:.1f}s")


def test_criterion_02_case_ii_oracle_and_kink():
    cfg = case_config("ii", N=10000, n=500, **OU)
    params = OracleCase.from_config(cfg)
    oracle = oracle_path(cfg.grid, params)
    ts = t_star_ou(params)
    errors, kinks = [], []
    for s in range(20):
        khat = run(replace(cfg, seed=s)).k_hat
        errors.append(k_sup_error(khat, oracle))
        kinks.append(cfg.grid.nodes[np.argmax(khat > 0)])
    good = sum(e <= 0.05 for e in errors)
    cells = np.abs(np.array(kinks) - ts) / cfg.grid.dt
    kink_ok = sum(c <= 2 for c in cells)
    ok = good >= 19 and kink_ok >= 19 and abs(ts - 0.182322) < 1e-6
    report(
        2,
        "case ii sup error <= 0.05, kink within 2 cells of t*",
        ok,
        f"{good}/20 seeds, worst {max(errors):.4f}; kink {kink_ok}/20 within 2 cells (max {cells.max():.2f}); t*={ts:.6f}",
    )


def test_criterion_03_rate_in_n():
    cfg = case_config("i", N=1000, n=100, **FIG1, L=100)
    start = time.perf_counter()
    study = rate_study(cfg, "n", LADDER, L=100)
    elapsed = time.perf_counter() - start
    ok = -0.7 <= study.slope <= -0.3 and elapsed <= 300
    errs = ", ".join(f"{e:.4f}" for e in study.errors)
    report(3, "slope of log E_hat vs log n in [-0.7, -0.3]", ok, f"slope {study.slope:.3f} (r2 {study.r2:.2f}), E_hat [{errs}], {elapsed:.0f}s")


def test_criterion_04_rate_in_N():
    cfg = case_config("i", N=100, n=100, **FIG1, L=100)
    study = rate_study(cfg, "N", LADDER, L=100)
    ok = -0.7 <= study.slope <= -0.3
    errs = ", ".join(f"{e:.4f}" for e in study.errors)
    report(4, "slope of log E_hat vs log N in [-0.7, -0.3]", ok, f"slope {study.slope:.3f} (r2 {study.r2:.2f}), E_hat [{errs}]")


def test_criterion_05_increment_equality():
    rng = np.random.default_rng(2024)
    start = time.perf_counter()
    worst_ratio = 0.0
    for _ in range(100):
        if rng.random() < 0.5:
            h = linear_constraint(rng.uniform(-1, 1))
        else:
            h = sine_constraint(rng.uniform(-1, 1), rng.uniform(-0.95, 0.95))
        cfg = SimulationConfig(
            N=int(rng.integers(10, 1001)),
            grid=make_grid(1.0, int(rng.integers(10, 201))),
            model=ModelCoefficients(beta=rng.uniform(0, 2), a=rng.uniform(0, 2), sigma=rng.uniform(0, 2)),
            constraint=h,
            initial=InitialCondition(x0=rng.uniform(-1, 2)),
            seed=int(rng.integers(2**63)),
        )
        bound = 2 * h.M * cfg.root_tol / h.m

        def on_step(prev, new, g):
            nonlocal worst_ratio
            gap = abs((new.sup - prev.sup) - direct_increment(prev, cfg.grid, cfg.model, h, g, cfg.root_tol))
            worst_ratio = max(worst_ratio, gap / bound)

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", InitialConstraintWarning)
            run(cfg, on_step=on_step)
    elapsed = time.perf_counter() - start
    ok = worst_ratio <= 1 and elapsed <= 60
    report(5, "|dK_hat - direct increment| <= 2 M tol / m", ok, f"100 configs, worst gap/bound {worst_ratio:.3f}, {elapsed:.1f}s")


def test_criterion_06_g0_lipschitz():
    rng = np.random.default_rng(6)
    tol = 1e-10
    violations, worst = 0, -np.inf
    for _ in range(1000):
        h = sine_constraint(rng.uniform(-3, 3), 0.9)
        assert (h.m, h.M) == pytest.approx((0.1, 1.9))
        nu = EmpiricalMeasure(rng.normal(rng.uniform(-2, 2), rng.uniform(0.1, 3), int(rng.integers(1, 200))))
        if rng.random() < 0.5:
            mu = EmpiricalMeasure(rng.normal(rng.uniform(-2, 2), rng.uniform(0.1, 3), int(rng.integers(1, 200))))
        else:  # nearby measure, where the bound is tightest
            mu = EmpiricalMeasure(nu.samples + rng.normal(0, 1e-3, len(nu)) + rng.uniform(-0.1, 0.1))
        ratio = h.M / h.m
        excess = abs(g0_empirical(nu, h, tol) - g0_empirical(mu, h, tol)) - ratio * wasserstein1(nu, mu) - 2 * ratio * tol
        worst = max(worst, excess)
        violations += excess > 0
    report(6, "G0 Lipschitz in W1 on 1000 pairs", violations == 0, f"{violations} violations, worst excess {worst:.3g}")


def test_criterion_07_complementarity():
    runs = [
        case_config("i", N=10000, n=500, seed=0, **FIG1),
        case_config("ii", N=10000, n=500, seed=0, **OU),
        case_config("iv", N=5000, n=500, beta=2.0, a=1.0, gamma=1.0, x0=1.0, p=0.5),
        case_config("v", N=5000, n=500, T=5.0, beta=0.01, a=1.0, sigma=1.0, x0=SINE_ROOT + 0.1, p=math.pi / 2, alpha=0.9),
    ]
    rng = np.random.default_rng(7)
    for _ in range(20):
        h = sine_constraint(rng.uniform(-1, 1), rng.uniform(-0.9, 0.9)) if rng.random() < 0.5 else linear_constraint(rng.uniform(-1, 1))
        runs.append(
            SimulationConfig(
                N=int(rng.integers(10, 1000)),
                grid=make_grid(1.0, int(rng.integers(10, 200))),
                model=ModelCoefficients(beta=rng.uniform(0, 2), a=rng.uniform(0, 2), sigma=rng.uniform(0, 2)),
                constraint=h,
                initial=InitialCondition(kind="uniform", low=-1.0, high=2.0),
                seed=int(rng.integers(2**63)),
            )
        )
    failures, worst_c, worst_s = 0, -np.inf, -np.inf
    for cfg in runs:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", InitialConstraintWarning)
            b = run(cfg)
        h, tol = cfg.constraint, cfg.root_tol
        slack_c = -h.M * tol - b.mean_constraint.min()
        slack_s = float(np.sum(b.mean_constraint * b.increments)) - h.M * tol * b.k_hat[-1]
        worst_c, worst_s = max(worst_c, slack_c), max(worst_s, slack_s)
        failures += slack_c > 0 or slack_s > 0
    report(
        7,
        "discrete constraint and Skorokhod complementarity",
        failures == 0,
        f"{len(runs)} runs, {failures} failing; worst excess constraint {worst_c:.3g}, complementarity {worst_s:.3g}",
    )


def test_criterion_08_case_v():
    grid = make_grid(1.0, 500)
    tol = 1e-12
    lin = OracleCase("v", alpha=0.0, **OU)
    diff = float(np.max(np.abs(k_case_v(grid, lin, tol) - k_case_ii(grid.nodes, OracleCase("ii", **OU)))))
    lin_ok = diff <= 2 * grid.T / grid.n + tol

    cfg = case_config("v", N=20000, n=1000, T=15.0, beta=0.01, a=1.0, sigma=1.0, x0=SINE_ROOT + 0.1, p=math.pi / 2, alpha=0.9)
    oracle = oracle_path(cfg.grid, OracleCase.from_config(cfg))
    start = time.perf_counter()
    errors, good = seeds_within(cfg, oracle, 0.1, range(10))
    elapsed = time.perf_counter() - start
    ok = lin_ok and good >= 9 and elapsed <= 180
    report(
        8,
        "case v: alpha=0 matches case ii; particle K within 0.1",
        ok,
        f"alpha=0 gap {diff:.2e}; {good}/10 seeds, worst {max(errors):.4f}, {elapsed:.0f}s",
    )


def test_criterion_09_density_consistency():
    params = OracleCase("ii", **OU)
    a, b, p, x0 = params.a, params.beta, params.p, params.x0
    grid = make_grid(1.0, 1000)
    t = grid.nodes
    mean_x = np.maximum(np.exp(-a * t) * (x0 + b / a) - b / a, p)
    dens = np.array([density_k(m - p, -(b + a * m), 1.0) for m in mean_x])
    integral = float(np.sum(0.5 * (dens[1:] + dens[:-1])) * grid.dt)
    exact = float(k_case_ii(grid.T, params))
    bound = 1e-3 * (a * p + b) * grid.T
    report(9, "trapezoid integral of density_k reproduces K(T)", abs(integral - exact) <= bound, f"gap {abs(integral - exact):.2e} <= {bound:.2e}")


def test_criterion_10_case_iii_qualitative():
    eps = 0.05
    cfg = case_config("iii", N=10000, n=2000, T=5.0, beta=1.0, sigma=1 / (2 * eps), epsilon=eps, x0=1.0, p=0.9)
    params = OracleCase.from_config(cfg)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AsymptoticOracleWarning)
        oracle = oracle_path(cfg.grid, params)
    khat = run(cfg).k_hat
    ts, _ = case_iii_times(params)
    t = cfg.grid.nodes
    first = t[np.argmax(khat > 0)]
    monotone = bool(np.all(np.diff(khat) >= 0))
    zero_early = bool(np.all(khat[t <= ts / 2] == 0)) and ts / 2 < first < 2 * ts
    rel = k_sup_error(khat, oracle) / np.max(np.abs(oracle))
    if rel > 0.15:
        warnings.warn(f"case iii relative sup error {rel:.3f} exceeds the advisory 15%", AsymptoticOracleWarning)
    report(
        10,
        "case iii K_hat nondecreasing, zero before t*",
        monotone and zero_early,
        f"first push at {first:.4f} (t*={ts:.4f}); relative sup error {rel:.3f} (advisory 15%{', exceeded' if rel > 0.15 else ''})",
    )
