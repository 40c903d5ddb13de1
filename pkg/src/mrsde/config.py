"""YAML configuration files and programmatic config builders.

Key schema (unknown keys are errors)::

    model:        kind (i|ii|iii|iv|v|affine), beta, a, sigma, gamma, epsilon
    constraint:   kind (linear|sine), p, alpha, m, M
    initial:      kind (point|uniform|normal), x0, low, high, mean, std
    grid:         T, n
    particles:    N
    replications: L
    converge:     param (n|N), values, particle
    seed, root_tol

The roman ``model.kind`` values select a benchmark case with a closed-form
compensator; ``affine`` runs the scheme without an oracle.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field, replace

import yaml

from .model import (
    CASE_IDS,
    ConfigError,
    InitialCondition,
    ModelCoefficients,
    SimulationConfig,
    grid_probes,
    linear_constraint,
    make_grid,
    sine_constraint,
    validate_constraint,
)

SCHEMA = {
    "model": {"kind", "beta", "a", "sigma", "gamma", "epsilon"},
    "constraint": {"kind", "p", "alpha", "m", "M"},
    "initial": {"kind", "x0", "low", "high", "mean", "std"},
    "grid": {"T", "n"},
    "particles": {"N"},
    "replications": {"L"},
    "converge": {"param", "values", "particle"},
}
TOP_LEVEL = {"seed", "root_tol"}

MODEL_KINDS = CASE_IDS + ("affine",)


@dataclass(frozen=True)
class ConvergeSpec:
    param: str = "n"
    values: tuple = ()
    particle: int = 0


@dataclass(frozen=True)
class LoadedConfig:
    sim: SimulationConfig
    converge: ConvergeSpec = field(default_factory=ConvergeSpec)
    raw: dict = field(default_factory=dict)


def _check_keys(tree: dict) -> None:
    if not isinstance(tree, dict):
        raise ConfigError("configuration root must be a mapping")
    for key, value in tree.items():
        if key in TOP_LEVEL:
            continue
        if key not in SCHEMA:
            raise ConfigError(f"unknown configuration key {key!r}")
        if not isinstance(value, dict):
            raise ConfigError(f"section {key!r} must be a mapping")
        extra = set(value) - SCHEMA[key]
        if extra:
            raise ConfigError(f"unknown key(s) in {key}: {', '.join(sorted(extra))}")


def _num(section: dict, key: str, default=0.0) -> float:
    value = section.get(key, default)
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be a number, got {value!r}") from None


def _int(section: dict, key: str, default=None) -> int:
    value = section.get(key, default)
    if value is None:
        raise ConfigError(f"missing required key {key}")
    try:
        as_float = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key} must be an integer, got {value!r}") from None
    if not as_float.is_integer():
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return int(as_float)


def build_config(tree: dict) -> LoadedConfig:
    """Validate a configuration tree and build the simulation objects."""
    _check_keys(tree)
    mdl = tree.get("model", {})
    con = tree.get("constraint", {})
    ini = tree.get("initial", {})
    grd = tree.get("grid", {})

    kind = str(mdl.get("kind", "affine"))
    if kind not in MODEL_KINDS:
        raise ConfigError(f"model.kind must be one of {MODEL_KINDS}, got {kind!r}")
    beta, a = _num(mdl, "beta"), _num(mdl, "a")
    sigma, gamma, eps = _num(mdl, "sigma"), _num(mdl, "gamma"), _num(mdl, "epsilon")
    model = ModelCoefficients(beta=beta, a=a, sigma=sigma, gamma=gamma, epsilon=eps, stochastic_mean=kind == "iii")

    ckind = str(con.get("kind", "linear"))
    p, alpha = _num(con, "p"), _num(con, "alpha")
    m = con.get("m")
    M = con.get("M")
    if ckind == "linear":
        if alpha != 0:
            raise ConfigError("constraint.alpha only applies to the sine constraint")
        constraint = linear_constraint(p)
        if m is not None or M is not None:
            constraint = replace(constraint, m=float(m if m is not None else 1.0), M=float(M if M is not None else 1.0))
    elif ckind == "sine":
        constraint = sine_constraint(
            p, alpha, None if m is None else float(m), None if M is None else float(M)
        )
    else:
        raise ConfigError(f"constraint.kind must be 'linear' or 'sine', got {ckind!r}")
    diag = validate_constraint(constraint, grid_probes())
    if not diag.passed:
        raise ConfigError(f"constraint fails its declared bounds (m={constraint.m}, M={constraint.M}): {diag.violations}")

    _check_case_structure(kind, model, ckind)

    initial = InitialCondition(
        kind=str(ini.get("kind", "point")),
        x0=_num(ini, "x0"),
        low=_num(ini, "low", 0.0),
        high=_num(ini, "high", 1.0),
        mean=_num(ini, "mean", 0.0),
        std=_num(ini, "std", 1.0),
    )
    grid = make_grid(_num(grd, "T", 1.0), _int(grd, "n", 100))
    seed = _int(tree, "seed", 0)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    sim = SimulationConfig(
        N=_int(tree.get("particles", {}), "N", 1000),
        grid=grid,
        model=model,
        constraint=constraint,
        initial=initial,
        seed=seed,
        root_tol=_num(tree, "root_tol", 1e-10),
        L=_int(tree.get("replications", {}), "L", 1),
        case=None if kind == "affine" else kind,
    )

    cv = tree.get("converge", {})
    param = str(cv.get("param", "n"))
    if param not in ("n", "N"):
        raise ConfigError(f"converge.param must be 'n' or 'N', got {param!r}")
    values = cv.get("values", [])
    if not isinstance(values, (list, tuple)):
        raise ConfigError("converge.values must be a list")
    converge = ConvergeSpec(param=param, values=tuple(_int({"v": v}, "v") for v in values), particle=_int(cv, "particle", 0))
    return LoadedConfig(sim=sim, converge=converge, raw=copy.deepcopy(tree))


def _check_case_structure(kind: str, model: ModelCoefficients, ckind: str) -> None:
    if kind == "affine":
        return
    want = "sine" if kind == "v" else "linear"
    if ckind != want:
        raise ConfigError(f"case {kind} uses the {want} constraint, got {ckind}")
    zero = {
        "i": ("a", "gamma", "epsilon"),
        "ii": ("gamma", "epsilon"),
        "iii": ("a", "gamma"),
        "iv": ("sigma", "epsilon"),
        "v": ("gamma", "epsilon"),
    }[kind]
    nonzero = [name for name in zero if getattr(model, name) != 0]
    if nonzero:
        raise ConfigError(f"case {kind} requires {', '.join(nonzero)} = 0")


def load_config(path) -> LoadedConfig:
    try:
        with open(path) as fh:
            tree = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return build_config(tree or {})


def case_config(
    case: str,
    *,
    N: int = 1000,
    n: int = 100,
    T: float = 1.0,
    x0: float = 1.0,
    p: float = 0.5,
    beta: float = 0.0,
    a: float = 0.0,
    sigma: float = 0.0,
    gamma: float = 0.0,
    epsilon: float = 0.0,
    alpha: float = 0.0,
    seed: int = 0,
    L: int = 1,
    root_tol: float = 1e-10,
) -> SimulationConfig:
    """Shortcut for the benchmark configurations used in tests and studies."""
    tree = {
        "model": {"kind": case, "beta": beta, "a": a, "sigma": sigma, "gamma": gamma, "epsilon": epsilon},
        "constraint": {"kind": "sine" if case == "v" else "linear", "p": p, "alpha": alpha},
        "initial": {"kind": "point", "x0": x0},
        "grid": {"T": T, "n": n},
        "particles": {"N": N},
        "replications": {"L": L},
        "seed": seed,
        "root_tol": root_tol,
    }
    return build_config(tree).sim
