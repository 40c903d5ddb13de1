"""Empirical constraint functional, reflection amounts and Wasserstein-1 distance.

For an empirical measure ``nu = (1/N) sum delta_{U_i}`` the constraint
functional is ``H(x, nu) = mean(h(x + U_i))``. Its zero ``gbar0`` is found by
bisection inside a bracket derived from the bi-Lipschitz constants of ``h``;
``g0`` is the positive part.
"""

from __future__ import annotations

import numpy as np

from .model import ConstraintSpec

MAX_BISECTIONS = 400


class RootBracketError(ArithmeticError):
    """The declared bi-Lipschitz constants do not bracket the root."""

    def __init__(self, message: str, bound: str):
        super().__init__(message)
        self.bound = bound


class EmpiricalMeasure:
    """Uniformly weighted atoms, stored sorted and read-only."""

    __slots__ = ("samples",)

    def __init__(self, samples):
        arr = np.sort(np.asarray(samples, dtype=float).ravel())
        if arr.size == 0:
            raise ValueError("an empirical measure needs at least one atom")
        arr.flags.writeable = False
        self.samples = arr

    def __len__(self) -> int:
        return self.samples.size

    def __repr__(self) -> str:
        return f"EmpiricalMeasure(N={self.samples.size}, mean={self.samples.mean():.6g})"

    def shifted(self, x: float) -> "EmpiricalMeasure":
        return EmpiricalMeasure(self.samples + x)


def _samples(nu) -> np.ndarray:
    return nu.samples if isinstance(nu, EmpiricalMeasure) else np.asarray(nu, dtype=float)


def mean_constraint(x: float, samples: np.ndarray, h: ConstraintSpec) -> float:
    return float(np.mean(h.h(x + samples)))


def h_empirical(x: float, nu, h: ConstraintSpec) -> float:
    """``H(x, nu) = (1/N) sum_i h(x + U_i)``."""
    return mean_constraint(x, _samples(nu), h)


def default_root_tol(nu, h: ConstraintSpec) -> float:
    """Argument tolerance scaled to the size of the initial bracket."""
    return 1e-10 * max(1.0, abs(h_empirical(0.0, nu, h)) / h.m)


def solve_root(
    samples: np.ndarray,
    h: ConstraintSpec,
    tol: float,
    guess: float = 0.0,
    value_at_guess=None,
    hint: float | None = None,
) -> float:
    """Zero of ``x -> H(x, samples)`` to within ``tol`` in the argument.

    From ``v = H(guess)`` and ``m|dx| <= |dH| <= M|dx|`` the root lies in
    ``guess - v/m .. guess - v/M``; that interval (widened by ``tol`` to absorb
    rounding, and clipped to the side of ``guess`` the root must be on) is
    bisected until its width is at most ``2 tol``. The midpoint is returned.
    A ``hint`` inside that interval yields a second bracket of the same kind
    and the bisection runs on the intersection.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    v = mean_constraint(guess, samples, h) if value_at_guess is None else value_at_guess
    if v == 0:
        return float(guess)
    if v < 0:
        lo = max(guess - v / h.M - tol, guess)
        hi = guess - v / h.m + tol
        lo_bound, hi_bound = "M", "m"
    else:
        lo = guess - v / h.m - tol
        hi = min(guess - v / h.M + tol, guess)
        lo_bound, hi_bound = "m", "M"
    if hint is not None and lo < hint < hi and hi - lo > 2 * tol:
        vh = mean_constraint(hint, samples, h)
        if vh == 0:
            return float(hint)
        if vh < 0:
            lo, hi = max(lo, hint - vh / h.M - tol), min(hi, hint - vh / h.m + tol)
        else:
            lo, hi = max(lo, hint - vh / h.m - tol), min(hi, hint - vh / h.M + tol)
    if hi - lo > 2 * tol:
        f_lo = mean_constraint(lo, samples, h)
        f_hi = mean_constraint(hi, samples, h)
        if f_lo > 0:
            raise RootBracketError(
                f"H({lo:.6g}) = {f_lo:.3g} > 0: declared bi-Lipschitz constant {lo_bound} is violated",
                lo_bound,
            )
        if f_hi < 0:
            raise RootBracketError(
                f"H({hi:.6g}) = {f_hi:.3g} < 0: declared bi-Lipschitz constant {hi_bound} is violated",
                hi_bound,
            )
    for _ in range(MAX_BISECTIONS):
        if hi - lo <= 2 * tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:  # float resolution reached
            break
        f_mid = mean_constraint(mid, samples, h)
        if f_mid == 0:
            return mid
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def gbar0_empirical(nu, h: ConstraintSpec, tol: float | None = None) -> float:
    """Spatial zero of ``H(., nu)`` (may be negative)."""
    samples = _samples(nu)
    if tol is None:
        tol = default_root_tol(samples, h)
    return solve_root(samples, h, tol, 0.0)


def g0_empirical(nu, h: ConstraintSpec, tol: float | None = None) -> float:
    """``inf{x >= 0 : H(x, nu) >= 0}``; exactly 0 when the constraint already holds."""
    samples = _samples(nu)
    v = mean_constraint(0.0, samples, h)
    if v >= 0:
        return 0.0
    if tol is None:
        tol = 1e-10 * max(1.0, -v / h.m)
    return max(0.0, solve_root(samples, h, tol, 0.0, value_at_guess=v))


def wasserstein1(nu, mu) -> float:
    """W1 between two empirical measures via the quantile coupling."""
    a = nu.samples if isinstance(nu, EmpiricalMeasure) else np.sort(np.asarray(nu, dtype=float).ravel())
    b = mu.samples if isinstance(mu, EmpiricalMeasure) else np.sort(np.asarray(mu, dtype=float).ravel())
    if a.size == b.size:
        return float(np.mean(np.abs(a - b)))
    # merged CDF breakpoints k/na and j/nb; quantiles are constant in between
    cuts = np.union1d(np.arange(1, a.size + 1) / a.size, np.arange(1, b.size + 1) / b.size)
    cuts[-1] = 1.0
    widths = np.diff(np.concatenate(([0.0], cuts)))
    mids = cuts - 0.5 * widths
    ia = np.minimum((mids * a.size).astype(np.int64), a.size - 1)
    ib = np.minimum((mids * b.size).astype(np.int64), b.size - 1)
    return float(np.sum(widths * np.abs(a[ia] - b[ib])))
