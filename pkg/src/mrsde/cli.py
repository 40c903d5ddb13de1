"""Command-line entry point.

Exit codes: 0 success, 1 property failure, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import LoadedConfig, load_config
from .empirical import g0_empirical, wasserstein1
from .experiments import default_threads, rate_study
from .model import ConfigError, grid_probes, validate_constraint
from .oracles import InvalidOracleParams, OracleCase, oracle_path
from .scheme import direct_increment, run, write_columns

EXIT_OK, EXIT_PROPERTY, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("mrsde")


def _load(args) -> LoadedConfig:
    loaded = load_config(args.config)
    if args.seed is not None:
        loaded = replace(loaded, sim=replace(loaded.sim, seed=args.seed))
    return loaded


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _oracle_or_none(sim):
    if sim.case is None:
        return None
    try:
        return oracle_path(sim.grid, OracleCase.from_config(sim).check())
    except InvalidOracleParams as exc:
        log.warning("no oracle column: %s", exc)
        return None


def cmd_simulate(args) -> int:
    sim = _load(args).sim
    bundle = run(sim)
    bundle.k_oracle = _oracle_or_none(sim)
    path = _outdir(args) / "path.csv"
    bundle.to_csv(path)
    print(f"K_hat(T) = {float(bundle.k_hat[-1])!r}")
    log.info("wrote %s", path)
    return EXIT_OK


def cmd_oracle(args) -> int:
    sim = _load(args).sim
    params = OracleCase.from_config(sim).check()
    k = oracle_path(sim.grid, params)
    path = _outdir(args) / "oracle.csv"
    write_columns(path, {"t": sim.grid.nodes, "K_oracle": k})
    print(f"K(T) = {float(k[-1])!r}")
    return EXIT_OK


def validation_report(sim, lipschitz_pairs: int = 200) -> dict:
    """Run the scheme once and check its structural invariants."""
    h, tol = sim.constraint, sim.root_tol
    props = {}
    diag = validate_constraint(h, grid_probes())
    props["constraint_bounds"] = {
        "passed": bool(diag.passed),
        "worst": max(diag.monotonicity, diag.lower_bound, diag.upper_bound),
        "bound": diag.slack,
    }

    inc_gap = 0.0
    g0_running = []
    clouds = []

    def on_step(prev, new, g):
        nonlocal inc_gap
        direct = direct_increment(prev, sim.grid, sim.model, h, g, tol)
        inc_gap = max(inc_gap, abs((new.sup - prev.sup) - direct))
        g0_running.append(g0_empirical(new.u, h, tol=tol))
        if len(clouds) < lipschitz_pairs + 1:
            clouds.append(new.u.copy())

    bundle = run(sim, on_step=on_step)
    khat, mean_h, inc = bundle.k_hat, bundle.mean_constraint, bundle.increments

    ratio = h.M / h.m
    props["increment_equality"] = {"passed": bool(inc_gap <= 2 * ratio * tol), "worst": float(inc_gap), "bound": 2 * ratio * tol}
    props["monotone_k_hat"] = {"passed": bool(np.all(np.diff(khat) >= 0)), "worst": float(min(0.0, np.min(np.diff(khat), initial=0.0))), "bound": 0.0}
    ledger = np.maximum.accumulate(np.concatenate(([khat[0]], g0_running)))
    gap = float(np.max(np.abs(ledger - khat)))
    props["running_sup_ledger"] = {"passed": bool(gap <= 2 * tol), "worst": gap, "bound": 2 * tol}
    props["discrete_constraint"] = {
        "passed": bool(mean_h.min() >= -h.M * tol),
        "worst": float(mean_h.min()),
        "bound": -h.M * tol,
    }
    compl = float(np.sum(mean_h * inc))
    props["skorokhod_complementarity"] = {
        "passed": bool(compl <= h.M * tol * khat[-1] + 1e-15),
        "worst": compl,
        "bound": float(h.M * tol * khat[-1]),
    }
    worst = -np.inf
    for c1, c2 in zip(clouds, clouds[1:]):
        lhs = abs(g0_empirical(c1, h, tol) - g0_empirical(c2, h, tol))
        rhs = ratio * wasserstein1(np.sort(c1), np.sort(c2)) + 2 * ratio * tol
        worst = max(worst, lhs - rhs)
    props["g0_lipschitz"] = {"passed": bool(worst <= 0), "worst": float(worst), "bound": 0.0}
    return {"passed": all(p["passed"] for p in props.values()), "properties": props}


def cmd_validate(args) -> int:
    sim = _load(args).sim
    report = validation_report(sim)
    text = json.dumps(report, indent=2, default=float)
    (_outdir(args) / "report.json").write_text(text + "\n")
    print(text)
    return EXIT_OK if report["passed"] else EXIT_PROPERTY


def cmd_converge(args) -> int:
    loaded = _load(args)
    spec = loaded.converge
    if len(spec.values) < 3:
        raise ConfigError("converge.values needs at least 3 ladder points")
    study = rate_study(loaded.sim, spec.param, spec.values, L=loaded.sim.L, particle=spec.particle, threads=args.threads)
    path = _outdir(args) / "rate.csv"
    study.to_csv(path)
    print(f"slope of log E_hat vs log {spec.param}: {study.slope:.4f} (r2={study.r2:.4f})")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .config import case_config
    from .empirical import EmpiricalMeasure
    from .model import linear_constraint, make_grid

    checks = {}
    checks["grid"] = list(make_grid(1, 4).nodes) == [0, 0.25, 0.5, 0.75, 1]
    checks["g0_linear"] = abs(g0_empirical(EmpiricalMeasure([0, 1, 2]), linear_constraint(2.0)) - 1.0) < 1e-9
    checks["w1"] = wasserstein1(EmpiricalMeasure([0, 0, 0]), EmpiricalMeasure([1, 2, 3])) == 2.0
    cfg = case_config("i", N=1, n=1000, beta=2.0, sigma=0.0, x0=1.0, p=0.5)
    checks["deterministic_ramp"] = abs(run(cfg).k_hat[-1] - 1.5) < 1e-9
    cfg = case_config("i", N=200, n=50, beta=2.0, sigma=1.0, x0=1.0, p=0.5, seed=3)
    checks["determinism"] = np.array_equal(run(cfg).k_hat, run(cfg).k_hat)
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    return EXIT_OK if all(checks.values()) else EXIT_PROPERTY


COMMANDS = {
    "simulate": cmd_simulate,
    "oracle": cmd_oracle,
    "validate": cmd_validate,
    "converge": cmd_converge,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML configuration file")
    common.add_argument("--out", default=".", help="output directory (default: current)")
    common.add_argument("--seed", type=int, default=None, help="override the configured 64-bit seed")
    common.add_argument("--threads", type=int, default=None, help="worker threads (default: $MRSDE_THREADS or 1)")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(prog="mrsde", description="Particle simulation of mean reflected SDEs")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="run the particle scheme, write path.csv")
    sub.add_parser("oracle", parents=[common], help="write the closed-form compensator to oracle.csv")
    sub.add_parser("validate", parents=[common], help="check the scheme invariants, write report.json")
    sub.add_parser("converge", parents=[common], help="convergence-rate study, write rate.csv")
    sub.add_parser("selftest", parents=[common], help="quick built-in sanity checks")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.ERROR if args.quiet else logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.threads is None:
        args.threads = default_threads()
    if args.command != "selftest" and not args.config:
        print("error: --config is required", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
