"""Piecewise linear functions on a knot grid, plus lower convex hulls.

The regularization pipeline represents every 1-d profile (growth exponents,
their square roots, convex minorants) as a `PiecewiseLinear` over a fixed
strictly increasing knot vector.  Evaluation extrapolates with the end
slopes, which matches how the profiles are extended beyond the computed
window.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

__all__ = ["PiecewiseLinear", "lower_convex_hull"]


@dataclass(frozen=True)
class PiecewiseLinear:
    xs: np.ndarray
    ys: np.ndarray
    _slopes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape:
            raise DomainError("knot vectors must be equal-length 1-d arrays")
        if xs.size < 2:
            raise DomainError("need at least two knots")
        if not np.all(np.diff(xs) > 0):
            raise DomainError("knot abscissae must be strictly increasing")
        if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
            raise DomainError("knots must be finite")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "_slopes", np.diff(ys) / np.diff(xs))

    @property
    def n_knots(self) -> int:
        return int(self.xs.size)

    def slopes(self) -> np.ndarray:
        """Slope of each of the n-1 segments."""
        return self._slopes

    def __call__(self, x):
        x_arr = np.asarray(x, dtype=float)
        out = np.interp(x_arr, self.xs, self.ys)
        below = x_arr < self.xs[0]
        above = x_arr > self.xs[-1]
        if below.any():
            out = np.where(below, self.ys[0] + self._slopes[0] * (x_arr - self.xs[0]), out)
        if above.any():
            out = np.where(above, self.ys[-1] + self._slopes[-1] * (x_arr - self.xs[-1]), out)
        if np.ndim(x) == 0:
            return float(out)
        return out

    def slope_left(self, i: int) -> float:
        """Incoming slope at knot i (end slope extended at the first knot)."""
        return float(self._slopes[max(i - 1, 0)])

    def slope_right(self, i: int) -> float:
        """Outgoing slope at knot i (end slope extended at the last knot)."""
        return float(self._slopes[min(i, self._slopes.size - 1)])

    def derivative_at(self, x: float) -> float:
        """Right-continuous derivative; at the last knot, the last slope."""
        i = int(np.searchsorted(self.xs, x, side="right")) - 1
        i = min(max(i, 0), self._slopes.size - 1)
        return float(self._slopes[i])

    def is_convex(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.diff(self._slopes) >= -tol))

    def is_nondecreasing(self, tol: float = 0.0) -> bool:
        return bool(np.all(self._slopes >= -tol))

    def with_ys(self, ys: np.ndarray) -> "PiecewiseLinear":
        return PiecewiseLinear(self.xs, np.asarray(ys, dtype=float))


def lower_convex_hull(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Indices of the vertices of the greatest convex minorant of the points.

    xs must be strictly increasing.  Collinear interior points are dropped;
    the returned index set always contains 0 and len-1.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise DomainError("hull needs two equal-length 1-d arrays")
    if not np.all(np.diff(xs) > 0):
        raise DomainError("hull abscissae must be strictly increasing")

    hull: list[int] = []
    for i in range(xs.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # pop b unless (a, b, i) makes a strict left turn
            cross = (xs[b] - xs[a]) * (ys[i] - ys[a]) - (ys[b] - ys[a]) * (xs[i] - xs[a])
            if cross > 0.0:
                break
            hull.pop()
        hull.append(i)
    return np.asarray(hull, dtype=int)
