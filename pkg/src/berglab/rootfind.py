"""Bisection on monotone one-dimensional maps.

Used for calibrating multipliers whose response spans hundreds of orders of
magnitude; callers therefore work in log coordinates and pass f that may
return +-inf.  Infinite values still order correctly against the target, so
bisection proceeds; NaN aborts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import BracketError, DomainError

__all__ = ["BisectResult", "bisect_monotone"]


@dataclass(frozen=True)
class BisectResult:
    x: float
    f_x: float
    iterations: int
    converged: bool


def bisect_monotone(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    target: float = 0.0,
    *,
    tol: float,
    xtol: float = 0.0,
    max_iter: int = 200,
) -> BisectResult:
    """Solve f(x) = target for monotone f on [lo, hi].

    Direction is detected from the endpoint values.  Returns once
    |f(x) - target| <= tol, or with converged=False when the interval is
    exhausted (width <= xtol, or no representable midpoint remains) first.
    """
    if not lo < hi:
        raise DomainError(f"empty bracket [{lo}, {hi}]")
    f_lo = f(lo)
    f_hi = f(hi)
    if math.isnan(f_lo) or math.isnan(f_hi):
        raise DomainError("NaN at bracket endpoint")

    if f_lo == target:
        return BisectResult(lo, f_lo, 0, True)
    if f_hi == target:
        return BisectResult(hi, f_hi, 0, True)
    if (f_lo < target) == (f_hi < target):
        raise BracketError(
            f"target {target} not bracketed: f({lo})={f_lo}, f({hi})={f_hi}"
        )
    increasing = f_lo < target

    x_best, f_best = (lo, f_lo)
    if abs(f_hi - target) < abs(f_lo - target):
        x_best, f_best = (hi, f_hi)

    for it in range(1, max_iter + 1):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # floats exhausted between lo and hi
            return BisectResult(x_best, f_best, it - 1, abs(f_best - target) <= tol)
        f_mid = f(mid)
        if math.isnan(f_mid):
            raise DomainError(f"NaN from f({mid})")
        if abs(f_mid - target) <= abs(f_best - target):
            x_best, f_best = mid, f_mid
        if abs(f_mid - target) <= tol:
            return BisectResult(mid, f_mid, it, True)
        if (f_mid < target) == increasing:
            lo = mid
        else:
            hi = mid
        if hi - lo <= xtol:
            return BisectResult(x_best, f_best, it, abs(f_best - target) <= tol)

    return BisectResult(x_best, f_best, max_iter, abs(f_best - target) <= tol)
