"""Strong-error estimation against coupled exact solutions and convergence-rate studies."""

from __future__ import annotations

import csv
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .model import SimulationConfig, make_grid
from .scheme import coupled_reference_run, run

log = logging.getLogger(__name__)


def default_threads() -> int:
    value = os.environ.get("MRSDE_THREADS")
    try:
        return max(1, int(value)) if value else 1
    except ValueError:
        return 1


def k_sup_error(khat, koracle) -> float:
    khat = np.asarray(khat, dtype=float)
    koracle = np.asarray(koracle, dtype=float)
    if khat.shape != koracle.shape:
        raise ValueError(f"path lengths differ: {khat.shape} vs {koracle.shape}")
    return float(np.max(np.abs(khat - koracle)))


def replication_sup_sq_error(config: SimulationConfig, replication: int, particle: int = 0) -> float:
    """``max_k |Xbar_{T_k} - X~_{T_k}|^2`` for one tracked particle of one replication."""
    scheme = run(config, replication=replication, track=(particle,))
    ref = coupled_reference_run(config, replication=replication, particles=[particle])
    return float(np.max((ref.tracked[:, 0] - scheme.tracked[:, 0]) ** 2))


def error_estimator(config: SimulationConfig, L: int | None = None, particle: int = 0, threads: int | None = None) -> float:
    """Root mean over ``L`` replications of the pathwise sup-squared error."""
    L = config.L if L is None else int(L)
    if L < 1:
        raise ValueError("L must be >= 1")
    if not 0 <= particle < config.N:
        raise ValueError(f"tracked particle {particle} outside [0, {config.N})")
    threads = default_threads() if threads is None else max(1, int(threads))
    reps = range(L)
    if threads == 1:
        errs = [replication_sup_sq_error(config, r, particle) for r in reps]
    else:
        with ThreadPoolExecutor(threads) as pool:
            errs = list(pool.map(lambda r: replication_sup_sq_error(config, r, particle), reps))
    # fixed-order reduction, independent of scheduling
    return float(np.sqrt(np.sum(np.asarray(errs)) / L))


def loglog_slope(points) -> tuple[float, float, float]:
    """OLS fit of ``ln y = slope ln x + intercept``; returns ``(slope, intercept, r2)``."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if np.any(pts <= 0):
        raise ValueError("log-log regression needs positive coordinates")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.unique(lx).size < 2:
        raise ValueError("need at least two distinct abscissae")
    mx, my = lx.mean(), ly.mean()
    dx, dy = lx - mx, ly - my
    slope = float(np.dot(dx, dy) / np.dot(dx, dx))
    intercept = float(my - slope * mx)
    ss_res = float(np.sum((dy - slope * dx) ** 2))
    ss_tot = float(np.dot(dy, dy))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return slope, intercept, r2


@dataclass(frozen=True)
class RateStudy:
    param: str
    values: tuple
    errors: tuple
    slope: float
    intercept: float
    r2: float

    def __post_init__(self):
        if len(self.values) < 3 or len(self.values) != len(self.errors):
            raise ValueError("a rate study needs at least 3 (value, error) points")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ValueError("parameter values must be strictly increasing")
        if any(e <= 0 for e in self.errors):
            raise ValueError("errors must be strictly positive")

    @classmethod
    def fit(cls, param: str, values, errors) -> "RateStudy":
        slope, intercept, r2 = loglog_slope(list(zip(values, errors)))
        return cls(param, tuple(values), tuple(float(e) for e in errors), slope, intercept, r2)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["param", "E_hat"])
            for v, e in zip(self.values, self.errors):
                writer.writerow([v, repr(e)])
            writer.writerow([repr(self.slope), repr(self.intercept), repr(self.r2)])


def read_rate_csv(path) -> RateStudy:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body, footer = rows[0], rows[1:-1], rows[-1]
    if header != ["param", "E_hat"] or len(footer) != 3:
        raise ValueError(f"{path} is not a rate-study file")
    values = tuple(int(r[0]) for r in body)
    errors = tuple(float(r[1]) for r in body)
    slope, intercept, r2 = (float(x) for x in footer)
    return RateStudy("?", values, errors, slope, intercept, r2)


def with_param(config: SimulationConfig, param: str, value: int) -> SimulationConfig:
    if param == "n":
        return replace(config, grid=make_grid(config.grid.T, int(value)))
    if param == "N":
        return replace(config, N=int(value))
    raise ValueError(f"can only vary 'n' or 'N', got {param!r}")


def rate_study(config: SimulationConfig, param: str, values, L: int | None = None, particle: int = 0, threads=None) -> RateStudy:
    values = [int(v) for v in values]
    if len(values) < 3:
        raise ValueError("a rate study needs at least 3 parameter values")
    errors = []
    for v in values:
        e = error_estimator(with_param(config, param, v), L=L, particle=particle, threads=threads)
        log.info("%s=%d  E_hat=%.6g", param, v, e)
        errors.append(e)
    return RateStudy.fit(param, values, errors)
