"""Closed-form compensators for the benchmark cases, the generator and the dK density.

Cases (all with ``b(t,x) = -(beta + a_t x)``, ``sigma(t,x) = sigma + gamma x``):

* ``i``   drifted Brownian motion, ``h(x) = x - p``;
* ``ii``  Ornstein-Uhlenbeck, ``h(x) = x - p``;
* ``iii`` OU with stochastic mean-reversion ``a_t = -epsilon B_t`` (first order in epsilon);
* ``iv``  Black-Scholes type, ``sigma = 0``, ``gamma > 0``; same K as ``ii``;
* ``v``   OU with ``h(x) = x + alpha sin(x) - p``, K obtained by inverting ``F_t``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .empirical import MAX_BISECTIONS
from .model import ConfigError, ConstraintSpec, ModelCoefficients, SimulationConfig, TimeGrid, eval_diffusion, eval_drift


class InvalidOracleParams(ConfigError):
    pass


class UnsupportedConstraint(ValueError):
    pass


class AsymptoticOracleWarning(UserWarning):
    """The case (iii) formula drops an o(epsilon) remainder."""


@dataclass(frozen=True)
class OracleCase:
    case: str
    beta: float = 0.0
    a: float = 0.0
    sigma: float = 0.0
    gamma: float = 0.0
    epsilon: float = 0.0
    x0: float = 0.0
    p: float = 0.0
    alpha: float = 0.0

    @classmethod
    def from_config(cls, config: SimulationConfig) -> "OracleCase":
        if config.case is None:
            raise InvalidOracleParams("configuration does not name a benchmark case (model.kind)")
        if not config.initial.is_point:
            raise InvalidOracleParams("closed-form compensators need a deterministic initial point")
        mdl, con = config.model, config.constraint
        return cls(
            case=config.case,
            beta=mdl.beta,
            a=mdl.a,
            sigma=mdl.sigma,
            gamma=mdl.gamma,
            epsilon=mdl.epsilon,
            x0=config.x0,
            p=con.p,
            alpha=con.alpha,
        )

    def problems(self) -> list[str]:
        """Violated validity conditions (empty when the case applies)."""
        out = []
        c = self.case
        if c == "i":
            if self.x0 < self.p:
                out.append("case i needs x0 >= p")
        elif c in ("ii", "iv"):
            if not self.a > 0:
                out.append(f"case {c} needs a > 0")
            elif not self.x0 >= self.p > -self.beta / self.a:
                out.append(f"case {c} needs x0 >= p > -beta/a")
        elif c == "iii":
            if not (self.epsilon > 0 and self.sigma > 0):
                out.append("case iii needs epsilon > 0 and sigma > 0")
            elif not self.x0 > self.p:
                out.append("case iii needs x0 > p")
            elif not self.beta**2 > 2 * self.epsilon * self.sigma * (self.x0 - self.p):
                out.append("case iii needs beta^2 > 2 epsilon sigma (x0 - p)")
        elif c == "v":
            if not self.a > 0:
                out.append("case v needs a > 0")
            if not abs(self.alpha) < 1:
                out.append("case v needs |alpha| < 1")
            elif self.x0 + self.alpha * math.sin(self.x0) - self.p < 0:
                out.append("case v needs h(x0) >= 0")
        else:
            out.append(f"unknown case {c!r}")
        return out

    def check(self, *cases: str) -> "OracleCase":
        if cases and self.case not in cases:
            raise InvalidOracleParams(f"expected case in {cases}, got {self.case!r}")
        problems = self.problems()
        if problems:
            raise InvalidOracleParams("; ".join(problems))
        return self


# --------------------------------------------------------------------------- linear constraint


def k_case_i(t, params: OracleCase):
    params.check("i")
    t = np.asarray(t, dtype=float)
    return np.maximum(params.p + params.beta * t - params.x0, 0.0)


def t_star_ou(params: OracleCase) -> float:
    """Time at which the OU mean reaches the barrier ``p``."""
    a, b = params.a, params.beta
    return (math.log(params.x0 + b / a) - math.log(params.p + b / a)) / a


def k_case_ii(t, params: OracleCase):
    """Linear ramp ``(a p + beta)(t - t*)`` after ``t*``; also case iv."""
    params.check("ii", "iv")
    t = np.asarray(t, dtype=float)
    ts = t_star_ou(params)
    return np.where(t >= ts, (params.a * params.p + params.beta) * (t - ts), 0.0)


def case_iii_times(params: OracleCase) -> tuple[float, float]:
    """``(t*, t_bar)`` for the stochastic-mean case."""
    b, es, d = params.beta, params.epsilon * params.sigma, params.x0 - params.p
    return (b - math.sqrt(b * b - 2 * d * es)) / es, b / es


def k_case_iii(t, params: OracleCase, warn_horizon: float | None = None):
    """First-order-in-epsilon compensator; the o(epsilon) remainder is dropped."""
    params.check("iii")
    t = np.asarray(t, dtype=float)
    horizon = float(np.max(t)) if warn_horizon is None else warn_horizon
    if params.epsilon**2 * horizon**3 / 6 > 1e-2:
        warnings.warn(
            f"case iii oracle is asymptotic in epsilon; epsilon^2 T^3/6 = "
            f"{params.epsilon**2 * horizon**3 / 6:.3g} is not small",
            AsymptoticOracleWarning,
            stacklevel=2,
        )
    ts, tbar = case_iii_times(params)
    es = params.epsilon * params.sigma
    d = params.x0 - params.p
    ramp = -d + params.beta * t - es * t * t / 2
    plateau = -d + params.beta**2 / (2 * es)
    return np.where(t < ts, 0.0, np.where(t < tbar, ramp, plateau))


# --------------------------------------------------------------------------- nonlinear constraint


def ou_noise_variance(t, a: float, sigma: float):
    """Variance of ``sigma int_0^t e^{-a(t-s)} dB_s``."""
    t = np.asarray(t, dtype=float)
    return sigma**2 * -np.expm1(-2 * a * t) / (2 * a)


def damping(t, params: OracleCase, convention: str = "exact"):
    """``E[cos G_t]`` for the centred Gaussian OU noise ``G_t``.

    ``"exact"`` is ``exp(-Var/2)``; ``"printed"`` is the alternative
    expression ``exp(-e^{-at} sigma^2 sinh(at)/a) = exp(-Var)``.
    """
    var = ou_noise_variance(t, params.a, params.sigma)
    if convention == "exact":
        return np.exp(-var / 2)
    if convention == "printed":
        return np.exp(-var)
    raise ValueError(f"unknown damping convention {convention!r}")


def ou_mean_free(t, params: OracleCase):
    """Deterministic part ``e^{-at}(x0 - beta (e^{at}-1)/a)`` of the free OU path."""
    t = np.asarray(t, dtype=float)
    a = params.a
    return np.exp(-a * t) * (params.x0 - params.beta * np.expm1(a * t) / a)


def f_eval(t, x, params: OracleCase, convention: str = "exact"):
    """``F_t(x) = E[h(X_t)]`` when the accumulated push is ``int_0^t e^{as} dK_s = x``."""
    params.check("v")
    a = params.a
    arg = np.exp(-a * np.asarray(t, dtype=float)) * (params.x0 - params.beta * np.expm1(a * np.asarray(t)) / a + x)
    return arg + params.alpha * damping(t, params, convention) * np.sin(arg) - params.p


def _bisect_scalar(f, lo: float, hi: float, tol: float) -> float:
    f_lo, f_hi = f(lo), f(hi)
    if f_lo > 0 or f_hi < 0:
        raise InvalidOracleParams(f"bisection bracket [{lo}, {hi}] does not contain a root")
    for _ in range(MAX_BISECTIONS):
        if hi - lo <= 2 * tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if f(mid) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def case_v_paths(grid: TimeGrid, params: OracleCase, tol: float = 1e-12, convention: str = "exact"):
    """Compensator ``K`` and accumulated push ``Kbar = sup_s (F_s^{-1}(0))^+`` on the grid.

    ``F_t(x) = 0`` is solved in the variable ``w = e^{-at}(x0 - beta(e^{at}-1)/a + x)``,
    i.e. ``w + alpha g(t) sin(w) = p``, whose root lies in ``[p - |alpha| g, p + |alpha| g]``.
    ``dK = e^{-at} dKbar`` is summed with midpoint weights.
    """
    params.check("v")
    a, alpha, p = params.a, params.alpha, params.p
    t = grid.nodes
    g = damping(t, params, convention)
    free = ou_mean_free(t, params)
    kbar = np.empty(t.size)
    k = np.empty(t.size)
    running = 0.0
    for j, tj in enumerate(t):
        amp = abs(alpha) * g[j]
        w = _bisect_scalar(lambda z: z + alpha * g[j] * math.sin(z) - p, p - amp - tol, p + amp + tol, tol)
        root = math.exp(a * tj) * (w - free[j])
        new = max(running, root, 0.0)
        if j == 0:
            k[0] = new
        else:
            k[j] = k[j - 1] + math.exp(-a * 0.5 * (t[j - 1] + tj)) * (new - running)
        kbar[j] = new
        running = new
    return k, kbar


def k_case_v(grid: TimeGrid, params: OracleCase, tol: float = 1e-12, convention: str = "exact") -> np.ndarray:
    return case_v_paths(grid, params, tol, convention)[0]


def oracle_path(grid: TimeGrid, params: OracleCase, tol: float = 1e-12, convention: str = "exact") -> np.ndarray:
    """Oracle ``K`` at every grid node for any of the five cases."""
    c = params.case
    if c == "i":
        return k_case_i(grid.nodes, params)
    if c in ("ii", "iv"):
        return k_case_ii(grid.nodes, params)
    if c == "iii":
        return k_case_iii(grid.nodes, params)
    if c == "v":
        return k_case_v(grid, params, tol, convention)
    raise InvalidOracleParams(f"unknown case {c!r}")


# --------------------------------------------------------------------------- generator and density


def generator_apply(constraint: ConstraintSpec, model: ModelCoefficients, t: float, x, brownian=None, half: bool = False):
    """``L h(x) = b(t,x) h'(x) + sigma(t,x)^2 h''(x)``.

    The second-order term carries no 1/2 by default; ``half=True`` gives the
    Ito generator.
    """
    if not constraint.smooth:
        raise UnsupportedConstraint("generator needs h_prime and h_second")
    s = eval_diffusion(model, t, x)
    second = s * s * constraint.h_second(x)
    if half:
        second = 0.5 * second
    return eval_drift(model, t, x, brownian) * constraint.h_prime(x) + second


def density_k(mean_h: float, mean_Lh: float, mean_hprime: float, boundary_tol: float = 1e-9) -> float:
    """Density of dK: ``(E[Lh])^- / E[h']`` on the boundary ``E[h] = 0``, else 0."""
    if not mean_hprime > 0:
        raise ValueError(f"E[h'] must be positive, got {mean_hprime}")
    if abs(mean_h) > boundary_tol:
        return 0.0
    return max(0.0, -mean_Lh) / mean_hprime
