"""Interacting-particle Euler scheme for mean reflected SDEs.

Each step advances the unreflected particles ``U`` with coefficients frozen
at the reflected positions ``X``, computes the reflection amount ``G0`` of the
new empirical measure of ``U`` and keeps its running supremum ``S``; the
reflected particles are ``X = U + S``.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .empirical import RootBracketError, g0_empirical, mean_constraint, solve_root
from .model import ConstraintSpec, ModelCoefficients, SimulationConfig, TimeGrid, eval_diffusion, eval_drift
from .oracles import InvalidOracleParams, OracleCase, case_v_paths, oracle_path, t_star_ou
from .streams import AUX_LANE, SCHEME_LANE, GaussianStreams, initial_generator

log = logging.getLogger(__name__)


class InitialConstraintWarning(UserWarning):
    """The drawn initial cloud violates ``mean h(X_0) >= 0``."""


@dataclass
class ParticleCloud:
    k: int
    x: np.ndarray  # reflected particles
    u: np.ndarray  # unreflected particles
    sup: float  # running sup of G0, equal to K_hat at step k
    k_hat: list = field(default_factory=list)
    brownian: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.x.size


@dataclass
class PathBundle:
    grid: TimeGrid
    k_hat: np.ndarray | None
    mean_constraint: np.ndarray | None
    tracked_indices: tuple = ()
    tracked: np.ndarray | None = None  # (n+1, len(tracked_indices))
    snapshots: np.ndarray | None = None  # (n+1, N), opt-in
    k_oracle: np.ndarray | None = None
    terminal: ParticleCloud | None = None

    @property
    def increments(self) -> np.ndarray:
        """``Delta_k K_hat`` with ``Delta_0 = K_hat_0``."""
        return np.diff(self.k_hat, prepend=0.0)

    @property
    def times(self) -> np.ndarray:
        rows = len(self.k_hat) if self.k_hat is not None else len(self.k_oracle)
        return self.grid.nodes[:rows]

    def to_csv(self, path) -> None:
        cols = {"t": self.times}
        if self.k_hat is not None:
            cols["K_hat"] = self.k_hat
        if self.mean_constraint is not None:
            cols["mean_constraint"] = self.mean_constraint
        if self.k_oracle is not None:
            cols["K_oracle"] = self.k_oracle[: len(cols["t"])]
        write_columns(path, cols)


def write_columns(path, cols: dict) -> None:
    names = list(cols)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in zip(*(cols[c] for c in names)):
            writer.writerow([repr(float(v)) for v in row])


# --------------------------------------------------------------------------- one step


def init_cloud(config: SimulationConfig, replication: int = 0) -> ParticleCloud:
    """Initial draws, with ``S = G0`` of the initial empirical measure."""
    rng = None if config.initial.is_point else initial_generator(config.seed, replication)
    x0 = config.initial.sample(config.N, rng)
    h = config.constraint
    start = mean_constraint(0.0, x0, h)
    if start < 0:
        warnings.warn(
            f"initial cloud violates the constraint: mean h(X_0) = {start:.4g} < 0; "
            "the first step starts with a positive push",
            InitialConstraintWarning,
            stacklevel=2,
        )
    s = g0_empirical(x0, h, tol=config.root_tol)
    return ParticleCloud(k=0, x=x0 + s, u=x0.copy(), sup=s, k_hat=[s], brownian=np.zeros(config.N))


def _euler_increment(cloud: ParticleCloud, grid: TimeGrid, model: ModelCoefficients, gaussians):
    t = grid.nodes[cloud.k]
    dt = grid.dt
    db = math.sqrt(dt) * np.asarray(gaussians, dtype=float)
    incr = dt * eval_drift(model, t, cloud.x, cloud.brownian) + eval_diffusion(model, t, cloud.x) * db
    return incr, db


def step(
    cloud: ParticleCloud,
    grid: TimeGrid,
    model: ModelCoefficients,
    constraint: ConstraintSpec,
    gaussians,
    root_tol: float = 1e-10,
) -> ParticleCloud:
    if np.shape(gaussians) != cloud.x.shape:
        raise ValueError(f"need {cloud.size} gaussians, got shape {np.shape(gaussians)}")
    incr, db = _euler_increment(cloud, grid, model, gaussians)
    u = cloud.u + incr
    sup = cloud.sup
    # G0(new) <= sup exactly when H(sup, new) >= 0, so the root is only needed otherwise
    v = mean_constraint(sup, u, constraint)
    if v < 0:
        try:
            # the previous push is a good predictor of this one
            last = cloud.k_hat[-1] - cloud.k_hat[-2] if len(cloud.k_hat) > 1 else 0.0
            hint = sup + last if last > 0 else None
            sup = max(sup, solve_root(u, constraint, root_tol, guess=sup, value_at_guess=v, hint=hint))
        except RootBracketError as exc:
            raise RootBracketError(f"step {cloud.k + 1}: {exc}", exc.bound) from exc
    brownian = cloud.brownian + db if cloud.brownian is not None else None
    return ParticleCloud(k=cloud.k + 1, x=u + sup, u=u, sup=sup, k_hat=cloud.k_hat + [sup], brownian=brownian)


def direct_increment(
    cloud: ParticleCloud,
    grid: TimeGrid,
    model: ModelCoefficients,
    constraint: ConstraintSpec,
    gaussians,
    root_tol: float = 1e-10,
) -> float:
    """One-step push ``inf{x >= 0 : mean h(x + X + dt b(X) + sigma(X) dB) >= 0}``."""
    incr, _ = _euler_increment(cloud, grid, model, gaussians)
    return g0_empirical(cloud.x + incr, constraint, tol=root_tol)


# --------------------------------------------------------------------------- full runs


def run(
    config: SimulationConfig,
    replication: int = 0,
    n_steps: int | None = None,
    track=(0,),
    record_particles: bool = False,
    on_step: Callable[[ParticleCloud, ParticleCloud, np.ndarray], None] | None = None,
) -> PathBundle:
    """Run the scheme over the grid (or its first ``n_steps`` steps)."""
    grid = config.grid
    n_steps = grid.n if n_steps is None else int(n_steps)
    if not 0 <= n_steps <= grid.n:
        raise ValueError(f"n_steps must lie in [0, {grid.n}]")
    track = tuple(int(i) for i in track if 0 <= int(i) < config.N)
    h = config.constraint

    cloud = init_cloud(config, replication)
    mean_h = np.empty(n_steps + 1)
    tracked = np.empty((n_steps + 1, len(track)))
    snaps = np.empty((n_steps + 1, config.N)) if record_particles else None

    def record(c: ParticleCloud) -> None:
        mean_h[c.k] = mean_constraint(0.0, c.x, h)
        tracked[c.k] = c.x[list(track)]
        if snaps is not None:
            snaps[c.k] = c.x

    record(cloud)
    if n_steps:
        streams = GaussianStreams.for_cloud(config.seed, replication, config.N, SCHEME_LANE)
        for g in streams.iter_steps(n_steps):
            new = step(cloud, grid, config.model, h, g, config.root_tol)
            if on_step is not None:
                on_step(cloud, new, g)
            cloud = new
            record(cloud)
    log.debug("run rep=%d: K_hat(T)=%.6g", replication, cloud.sup)
    return PathBundle(
        grid=grid,
        k_hat=np.asarray(cloud.k_hat),
        mean_constraint=mean_h,
        tracked_indices=track,
        tracked=tracked,
        snapshots=snaps,
        terminal=cloud,
    )


REFERENCE_CASES = ("i", "ii", "iv", "v")


def coupled_reference_run(
    config: SimulationConfig,
    replication: int = 0,
    particles=None,
    tol: float = 1e-12,
    convention: str = "exact",
) -> PathBundle:
    """True-solution paths driven by the same Gaussian streams as :func:`run`.

    ``X = Y + D`` where ``Y`` is the unreflected SDE advanced by its exact
    grid transition and ``D`` the deterministic (cases i, ii, v) or
    multiplicative (case iv) response to the oracle compensator.
    """
    case = config.case
    if case not in REFERENCE_CASES:
        raise InvalidOracleParams(f"no coupled reference for case {case!r}; supported: {REFERENCE_CASES}")
    params = OracleCase.from_config(config).check()
    grid = config.grid
    t = grid.nodes
    dt = grid.dt
    idx = np.arange(config.N) if particles is None else np.asarray(particles, dtype=np.int64)
    n = grid.n

    noise = GaussianStreams(config.seed, replication, idx, SCHEME_LANE)
    k_path = oracle_path(grid, params, tol, convention)
    beta, a = params.beta, params.a
    x = np.empty((n + 1, idx.size))
    y = np.full(idx.size, params.x0)

    if case == "i":
        x[0] = y + k_path[0]
        for k, g in enumerate(noise.iter_steps(n), start=1):
            y = y - beta * dt + params.sigma * math.sqrt(dt) * g
            x[k] = y + k_path[k]
    elif case in ("ii", "v"):
        if case == "ii":
            ts = t_star_ou(params)
            c = a * params.p + beta
            push = np.where(t >= ts, c * -np.expm1(-a * (t - ts)) / a, 0.0)
        else:
            _, kbar = case_v_paths(grid, params, tol, convention)
            push = np.exp(-a * t) * kbar
        decay = math.exp(-a * dt)
        shift = beta * -math.expm1(-a * dt) / a
        # exact OU noise int e^{-a(dt-s)} dB_s, correlated with the scheme's dB
        sd_int = math.sqrt(-math.expm1(-2 * a * dt) / (2 * a))
        rho = (-math.expm1(-a * dt) / a) / math.sqrt(dt * sd_int**2) if sd_int > 0 else 1.0
        rho = min(rho, 1.0)
        aux = GaussianStreams(config.seed, replication, idx, AUX_LANE)
        x[0] = y + push[0]
        for k, (g, g2) in enumerate(zip(noise.iter_steps(n), aux.iter_steps(n)), start=1):
            z = rho * g + math.sqrt(1.0 - rho * rho) * g2
            y = decay * y - shift + params.sigma * sd_int * z
            x[k] = y + push[k]
    else:  # iv: X_t = Phi_t (x0 + int Phi_s^{-1} (dK_s - beta ds)), Phi = exp(-(a + gamma^2/2) t + gamma B_t)
        gam = params.gamma
        b = np.zeros(idx.size)
        inv_prev = np.ones(idx.size)
        acc = np.full(idx.size, params.x0)
        x[0] = params.x0
        for k, g in enumerate(noise.iter_steps(n), start=1):
            b = b + math.sqrt(dt) * g
            phi = np.exp(-(a + 0.5 * gam * gam) * t[k] + gam * b)
            inv = 1.0 / phi
            acc = acc + 0.5 * (inv_prev + inv) * ((k_path[k] - k_path[k - 1]) - beta * dt)
            x[k] = phi * acc
            inv_prev = inv
    return PathBundle(
        grid=grid,
        k_hat=None,
        mean_constraint=None,
        tracked_indices=tuple(int(i) for i in idx),
        tracked=x,
        k_oracle=k_path,
    )
