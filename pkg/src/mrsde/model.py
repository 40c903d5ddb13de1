"""Problem definition: time grid, SDE coefficients, constraint function and run configuration."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np


class ConfigError(ValueError):
    """Raised for invalid simulation parameters (maps to CLI exit code 2)."""


# --------------------------------------------------------------------------- grid


@dataclass(frozen=True)
class TimeGrid:
    """Regular subdivision ``T_k = k T / n`` of ``[0, T]``."""

    T: float
    n: int

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigError(f"horizon T must be positive and finite, got {self.T!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"number of steps n must be an integer >= 1, got {self.n!r}")

    @property
    def dt(self) -> float:
        return self.T / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        nodes = np.arange(self.n + 1, dtype=float) * self.T / self.n
        nodes[-1] = self.T
        nodes.flags.writeable = False
        return nodes

    def index_below(self, s: float) -> int:
        """Index of the largest node ``<= s`` (clamped to ``[0, n]``)."""
        if s <= 0:
            return 0
        if s >= self.T:
            return self.n
        k = min(int(math.floor(s * self.n / self.T)), self.n)
        nodes = self.nodes
        while k < self.n and nodes[k + 1] <= s:
            k += 1
        while k > 0 and nodes[k] > s:
            k -= 1
        return k

    def underbar(self, s: float) -> float:
        return float(self.nodes[self.index_below(s)])


def make_grid(T: float, n: int) -> TimeGrid:
    if isinstance(n, float) and n.is_integer():
        n = int(n)
    return TimeGrid(float(T), n)


# --------------------------------------------------------------------------- coefficients


@dataclass(frozen=True)
class ModelCoefficients:
    """Affine coefficients ``b(t,x) = -(beta + a x)``, ``sigma(t,x) = sigma + gamma x``.

    With ``stochastic_mean=True`` the mean-reversion rate is the path
    dependent ``a_t = -epsilon * B_t`` and the caller passes the running
    Brownian value of each particle. ``drift_fn``/``diffusion_fn`` override
    the affine family entirely.
    """

    beta: float = 0.0
    a: float = 0.0
    sigma: float = 0.0
    gamma: float = 0.0
    epsilon: float = 0.0
    stochastic_mean: bool = False
    drift_fn: Callable | None = None
    diffusion_fn: Callable | None = None

    def __post_init__(self):
        if self.sigma < 0 or self.gamma < 0 or self.epsilon < 0:
            raise ConfigError("sigma, gamma and epsilon must be non-negative")

    @property
    def is_frozen(self) -> bool:
        """True when both coefficients vanish identically."""
        return (
            self.drift_fn is None
            and self.diffusion_fn is None
            and self.beta == 0
            and self.a == 0
            and self.epsilon == 0
            and self.sigma == 0
            and self.gamma == 0
        )


def eval_drift(model: ModelCoefficients, t: float, x, brownian=None):
    if model.drift_fn is not None:
        return model.drift_fn(t, x)
    if model.stochastic_mean:
        b_t = 0.0 if brownian is None else brownian
        return -(model.beta - model.epsilon * b_t * x)
    return -(model.beta + model.a * x)


def eval_diffusion(model: ModelCoefficients, t: float, x):
    if model.diffusion_fn is not None:
        return model.diffusion_fn(t, x)
    return model.sigma + model.gamma * x


# --------------------------------------------------------------------------- constraint


@dataclass(frozen=True)
class ConstraintSpec:
    """Nondecreasing constraint function ``h`` with bi-Lipschitz constants ``m <= M``."""

    h: Callable
    m: float
    M: float
    h_prime: Callable | None = None
    h_second: Callable | None = None
    p: float = 0.0
    alpha: float = 0.0
    kind: str = "custom"

    def __post_init__(self):
        if not (self.m > 0):
            raise ConfigError(f"lower bi-Lipschitz constant m must be > 0, got {self.m}")
        if not (self.M >= self.m):
            raise ConfigError(f"upper constant M={self.M} must be >= m={self.m}")

    @property
    def smooth(self) -> bool:
        return self.h_prime is not None and self.h_second is not None

    @property
    def is_affine(self) -> bool:
        # bi-Lipschitz with m == M and nondecreasing forces h(x) = m x + c
        return self.m == self.M


def linear_constraint(p: float) -> ConstraintSpec:
    """``h(x) = x - p``."""
    return ConstraintSpec(
        h=lambda x: x - p,
        m=1.0,
        M=1.0,
        h_prime=lambda x: np.ones_like(np.asarray(x, dtype=float)),
        h_second=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        p=p,
        kind="linear",
    )


def sine_constraint(p: float, alpha: float, m: float | None = None, M: float | None = None) -> ConstraintSpec:
    """``h(x) = x + alpha sin(x) - p`` with ``|alpha| < 1``."""
    if not abs(alpha) < 1:
        raise ConfigError(f"sine constraint needs |alpha| < 1, got {alpha}")
    return ConstraintSpec(
        h=lambda x: x + alpha * np.sin(x) - p,
        m=1.0 - abs(alpha) if m is None else m,
        M=1.0 + abs(alpha) if M is None else M,
        h_prime=lambda x: 1.0 + alpha * np.cos(x),
        h_second=lambda x: -alpha * np.sin(x),
        p=p,
        alpha=alpha,
        kind="sine",
    )


@dataclass(frozen=True)
class ConstraintDiagnostics:
    monotonicity: float
    lower_bound: float
    upper_bound: float
    worst_pairs: dict = field(default_factory=dict)
    slack: float = 1e-9

    @property
    def violations(self) -> dict:
        out = {}
        for name in ("monotonicity", "lower_bound", "upper_bound"):
            if getattr(self, name) > self.slack:
                out[name] = getattr(self, name)
        return out

    @property
    def passed(self) -> bool:
        return not self.violations


def grid_probes(lo: float = -20.0, hi: float = 20.0, count: int = 10_000, strides=(1, 7, 101, 997)) -> np.ndarray:
    """Probe pairs ``(x_j, x_{j+s})`` on a uniform grid for several strides."""
    xs = np.linspace(lo, hi, count)
    pairs = [np.column_stack([xs[:-s], xs[s:]]) for s in strides if s < count]
    return np.vstack(pairs)


def validate_constraint(spec: ConstraintSpec, probes, slack: float = 1e-9) -> ConstraintDiagnostics:
    """Largest violation of monotonicity and of both Lipschitz bounds over the probes.

    Violations are measured on the difference quotient ``|h(x)-h(y)|/|x-y|``
    so they are comparable across probe scales.
    """
    probes = np.asarray(probes, dtype=float).reshape(-1, 2)
    x, y = probes[:, 0], probes[:, 1]
    dx = y - x
    if np.any(dx == 0):
        raise ValueError("probe pairs must satisfy x != y")
    dh = np.asarray(spec.h(y), dtype=float) - np.asarray(spec.h(x), dtype=float)
    quotient = dh / dx  # negative means decreasing
    ratio = np.abs(quotient)
    mono = -quotient
    lower = spec.m - ratio
    upper = ratio - spec.M
    worst = {}
    for name, arr in (("monotonicity", mono), ("lower_bound", lower), ("upper_bound", upper)):
        j = int(np.argmax(arr))
        worst[name] = (float(x[j]), float(y[j]))
    return ConstraintDiagnostics(
        monotonicity=float(max(mono.max(), 0.0)),
        lower_bound=float(max(lower.max(), 0.0)),
        upper_bound=float(max(upper.max(), 0.0)),
        worst_pairs=worst,
        slack=slack * max(1.0, spec.M),
    )


# --------------------------------------------------------------------------- initial condition / config


@dataclass(frozen=True)
class InitialCondition:
    """Deterministic point (default) or an i.i.d. sampler for ``X_0``."""

    kind: str = "point"
    x0: float = 0.0
    low: float = 0.0
    high: float = 1.0
    mean: float = 0.0
    std: float = 1.0

    def __post_init__(self):
        if self.kind not in ("point", "uniform", "normal"):
            raise ConfigError(f"unknown initial condition kind {self.kind!r}")
        if self.kind == "uniform" and not self.high > self.low:
            raise ConfigError("uniform initial condition needs high > low")
        if self.kind == "normal" and self.std < 0:
            raise ConfigError("normal initial condition needs std >= 0")

    @property
    def is_point(self) -> bool:
        return self.kind == "point"

    def sample(self, size: int, rng: np.random.Generator | None = None) -> np.ndarray:
        if self.kind == "point":
            return np.full(size, float(self.x0))
        if rng is None:
            raise ValueError("a generator is required for random initial conditions")
        if self.kind == "uniform":
            return rng.uniform(self.low, self.high, size)
        return rng.normal(self.mean, self.std, size)


CASE_IDS = ("i", "ii", "iii", "iv", "v")


@dataclass(frozen=True)
class SimulationConfig:
    N: int
    grid: TimeGrid
    model: ModelCoefficients
    constraint: ConstraintSpec
    initial: InitialCondition = InitialCondition()
    seed: int = 0
    root_tol: float = 1e-10
    L: int = 1
    case: str | None = None

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ConfigError(f"particle count N must be >= 1, got {self.N!r}")
        if int(self.L) != self.L or self.L < 1:
            raise ConfigError(f"replication count L must be >= 1, got {self.L!r}")
        if not self.root_tol > 0:
            raise ConfigError(f"root_tol must be > 0, got {self.root_tol!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.case is not None and self.case not in CASE_IDS:
            raise ConfigError(f"unknown case id {self.case!r}; expected one of {CASE_IDS}")

    @property
    def x0(self) -> float:
        return float(self.initial.x0)
