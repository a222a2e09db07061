"""Convex regularization of growth exponents.

Given samples of Q = sqrt(Lambda) on a grid, produce a piecewise-linear
convex increasing minorant q whose right derivative obeys q' <= q^2/2 at
every knot, together with the set of touch points where q still equals Q.
The regularized exponent is lambda = q^2 and the regularized theta is
exp(lambda(log 1/s)).

The construction below runs the patching loop in its piecewise-linear
rendering: the greatest convex minorant, an initial flattening of the first
cell, and then repeatedly replacing the region around the first derivative
violation by the polygon of the ODE p' = p^2/3.  The polygon (forward Euler
on the knots) is used instead of knot samples of the closed-form solution
3/(c + 3/q(c) - x): knot samples of that solution have chord slopes equal to
p^2/3 evaluated somewhere inside the cell, which near the blow-up exceeds
the p^2/2 budget at the left knot and re-triggers the same patch forever.
The polygon has right slope exactly p^2/3 at every patch knot, converges to
the closed form as the grid refines, and terminates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CertificationError, ConvergenceError, DomainError
from .logdomain import LogReal
from .piecewise import PiecewiseLinear, lower_convex_hull
from .reporting import PropertyCheck

__all__ = [
    "MinorantResult",
    "MinorantReport",
    "PatchRecord",
    "PropertyCheck",
    "greatest_convex_minorant",
    "regularize",
    "regularized_theta",
    "verify_minorant",
]

_REL_TOL = 1e-9
_SLACK = 1e-12


def greatest_convex_minorant(xs: np.ndarray, ys: np.ndarray) -> PiecewiseLinear:
    """Lower convex hull of the samples, as a piecewise-linear function on
    the hull vertices.  Touches the input exactly at the vertices."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
        raise DomainError("need matching 1-d sample arrays with at least 2 points")
    if not np.all(np.diff(xs) > 0.0):
        raise DomainError("sample abscissae must be strictly increasing")
    idx = lower_convex_hull(xs, ys)
    return PiecewiseLinear(xs[idx], ys[idx])


def _hull_values(xs: np.ndarray, v: np.ndarray) -> np.ndarray:
    idx = lower_convex_hull(xs, v)
    out = v.copy()
    keep = np.zeros(v.size, dtype=bool)
    keep[idx] = True
    chord = np.interp(xs, xs[idx], v[idx])
    out[~keep] = chord[~keep]
    return out


@dataclass(frozen=True)
class PatchRecord:
    """One pass of the derivative-repair loop, for traces and reports."""

    iteration: int
    b: float          # first knot violating q' <= q^2/2
    c: float          # left end of the q' > q^2/3 region (may be mid-cell)
    d: float          # right end of that region
    q_at_c: float
    stop_x: float     # knot where the patch polygon rejoined q

    def to_json_dict(self) -> dict:
        return {
            "b": self.b,
            "c": self.c,
            "d": self.d,
            "iteration": self.iteration,
            "q_at_c": self.q_at_c,
            "stop_x": self.stop_x,
        }


@dataclass(frozen=True)
class MinorantResult:
    """Output of regularize.

    xs includes any mid-cell knots inserted where a patch started; is_sample
    marks the knots that carry original Q samples.  touch_points lists the
    sample knots where q = Q and the right slope is at least epsilon0*q/2.
    growth_threshold is the smallest grid point beyond which
    q(x) >= exp(epsilon0*x/2) holds through the end of the domain.
    """

    xs: np.ndarray
    q_values: np.ndarray
    big_q: np.ndarray           # Q at sample knots, +inf at inserted knots
    is_sample: np.ndarray
    q: PiecewiseLinear
    epsilon0: float
    touch_points: tuple[float, ...]
    growth_threshold: float
    iterations: int
    patches: tuple[PatchRecord, ...]

    @property
    def domain(self) -> tuple[float, float]:
        return (float(self.xs[0]), float(self.xs[-1]))

    def lambda_at(self, x):
        q = self.q(x)
        return q * q

    def lambda_prime_at(self, x: float) -> float:
        """Right derivative of lambda = q^2."""
        return 2.0 * self.q(x) * self.q.derivative_at(x)

    def touch_data(self) -> list[tuple[float, float, float]]:
        """(x_n, lambda(x_n), lambda'(x_n)) for each touch point."""
        out = []
        for x_n in self.touch_points:
            q_n = float(self.q(x_n))
            out.append((x_n, q_n * q_n, 2.0 * q_n * self.q.derivative_at(x_n)))
        return out

    def to_json_dict(self) -> dict:
        return {
            "domain": list(self.domain),
            "epsilon0": self.epsilon0,
            "growth_threshold": self.growth_threshold,
            "iterations": self.iterations,
            "knots_x": [float(v) for v in self.xs],
            "knots_q": [float(v) for v in self.q_values],
            "patches": [p.to_json_dict() for p in self.patches],
            "touch_points": list(self.touch_points),
        }


def _precondition_trend(xs: np.ndarray, big_q: np.ndarray, epsilon0: float) -> None:
    # desk proxy for "exp(-eps0 x/2) Q(x) eventually increasing": demand a
    # nondecreasing tail of at least 4 points
    u = np.log(big_q) - 0.5 * epsilon0 * xs
    rising = np.diff(u) >= -1e-12
    start = 0
    for i in range(rising.size - 1, -1, -1):
        if not rising[i]:
            start = i + 1
            break
    if xs.size - start < 4:
        raise DomainError(
            "exp(-epsilon0 x/2) Q(x) has no nondecreasing tail on the grid; "
            f"trend holds only from index {start} of {xs.size}"
        )


def regularize(xs: np.ndarray, big_q: np.ndarray, epsilon0: float) -> MinorantResult:
    """Run the derivative-repair loop on samples of Q = sqrt(Lambda).

    Loop: take the greatest convex minorant, flatten the first cell's slope
    to at most Q(0)^2/3, then while some knot has right slope exceeding
    q^2/2, find the maximal surrounding region where the slope exceeds
    q^2/3 (interpolating its endpoints inside cells), and replace q there by
    the polygon of p' = p^2/3 started at the region's left end, capped by q
    and re-hulled.  Each patch strictly lowers q somewhere to the right of
    the violation, so the loop advances; the iteration cap guards bugs.
    """
    xs0 = np.asarray(xs, dtype=float)
    q0 = np.asarray(big_q, dtype=float)
    if xs0.ndim != 1 or xs0.shape != q0.shape or xs0.size < 8:
        raise DomainError("need matching 1-d arrays with at least 8 samples")
    if not np.all(np.diff(xs0) > 0.0):
        raise DomainError("grid must be strictly increasing")
    if not np.all(q0 > 0.0):
        raise DomainError("Q must be positive")
    if np.any(np.diff(q0) < 0.0):
        raise DomainError("Q must be nondecreasing")
    if not (0.0 < epsilon0 < 1.0):
        raise DomainError(f"epsilon0 must lie in (0,1), got {epsilon0}")
    _precondition_trend(xs0, q0, epsilon0)

    grid = xs0.copy()
    v = q0.copy()
    # initial adjustment: cap the first cell's slope at Q(0)^2/3
    cap = v[0] + (grid[1] - grid[0]) * v[0] * v[0] / 3.0
    v[1] = min(v[1], cap)
    v = _hull_values(grid, v)
    track_q = q0.copy()           # original samples, +inf at inserted knots
    is_sample = np.ones(grid.size, dtype=bool)

    max_iter = 10 * xs0.size
    patches: list[PatchRecord] = []
    iteration = 0
    while True:
        h = np.diff(grid)
        slopes = np.diff(v) / h
        left_q = v[:-1]
        viol_half = slopes > 0.5 * left_q * left_q * (1.0 + _SLACK)
        if not viol_half.any():
            break
        iteration += 1
        if iteration > max_iter:
            trace = ", ".join(
                f"(b={p.b:.6g}, c={p.c:.6g}, stop={p.stop_x:.6g})" for p in patches[-8:]
            )
            raise ConvergenceError(
                f"derivative repair exceeded {max_iter} iterations; "
                f"last patches: {trace}"
            )

        i_b = int(np.argmax(viol_half))
        b = float(grid[i_b])

        def third(j: int) -> bool:
            return slopes[j] > v[j] * v[j] / 3.0 * (1.0 + _SLACK)

        # extend left while whole cells violate q' > q^2/3 (right-endpoint test)
        jl = i_b
        while jl >= 1 and slopes[jl - 1] > v[jl] * v[jl] / 3.0:
            jl -= 1
        if jl >= 1 and third(jl - 1):
            # partial cell: q' = q^2/3 crosses inside cell jl-1
            s = slopes[jl - 1]
            q_star = math.sqrt(3.0 * s)
            x_c = grid[jl - 1] + (q_star - v[jl - 1]) / s
            if x_c <= grid[jl - 1] + 1e-12 * h[jl - 1]:
                x_c, q_c, insert_at = float(grid[jl - 1]), float(v[jl - 1]), None
            elif x_c >= grid[jl] - 1e-12 * h[jl - 1]:
                x_c, q_c, insert_at = float(grid[jl]), float(v[jl]), None
            else:
                q_c, insert_at = q_star, jl
        else:
            x_c, q_c, insert_at = float(grid[jl]), float(v[jl]), None

        # right end of the 1/3 region, for the trace
        jr = i_b
        while jr + 1 < slopes.size and third(jr + 1):
            jr += 1
        if slopes[jr] > v[jr + 1] * v[jr + 1] / 3.0:
            d = float(grid[jr + 1])
        else:
            d = float(grid[jr] + (math.sqrt(3.0 * slopes[jr]) - v[jr]) / slopes[jr])

        if insert_at is not None:
            grid = np.insert(grid, insert_at, x_c)
            v = np.insert(v, insert_at, q_c)
            track_q = np.insert(track_q, insert_at, math.inf)
            is_sample = np.insert(is_sample, insert_at, False)
            idx_c = insert_at
        else:
            idx_c = int(np.searchsorted(grid, x_c))

        # polygon of p' = p^2/3 from (x_c, q_c), capped by the current q
        p = q_c
        changed = False
        stop_x = float(grid[-1])
        for j in range(idx_c, grid.size - 1):
            step = grid[j + 1] - grid[j]
            p = p + step * p * p / 3.0
            if p >= v[j + 1]:
                stop_x = float(grid[j + 1])
                break
            v[j + 1] = p
            changed = True
        patches.append(PatchRecord(iteration, b, x_c, d, q_c, stop_x))
        if not changed:
            raise ConvergenceError(
                f"patch at c={x_c:.6g} (iteration {iteration}) changed nothing; "
                "grid too coarse for the repair polygon"
            )
        v = _hull_values(grid, v)

    # touch points: sample knots where q kept the Q value and the right
    # slope clears the epsilon0 q / 2 floor
    pl = PiecewiseLinear(grid, v)
    touches: list[float] = []
    for i in range(grid.size):
        if not is_sample[i]:
            continue
        if abs(v[i] - track_q[i]) > _REL_TOL * track_q[i]:
            continue
        s_r = pl.slope_right(i)
        if s_r >= 0.5 * epsilon0 * v[i] * (1.0 - _SLACK):
            touches.append(float(grid[i]))
    if not touches:
        raise CertificationError(
            "no touch points survive the slope filter; the precondition trend "
            "was too weak for this grid"
        )

    # growth threshold: q(x) >= exp(epsilon0 x / 2) from here to the end
    ok = 2.0 * np.log(v) >= epsilon0 * grid - 1e-9
    a_idx = None
    for i in range(grid.size - 1, -1, -1):
        if not ok[i]:
            break
        a_idx = i
    if a_idx is None:
        raise CertificationError(
            "q never dominates exp(epsilon0 x/2); growth threshold undefined"
        )

    return MinorantResult(
        xs=grid,
        q_values=v,
        big_q=track_q,
        is_sample=is_sample,
        q=pl,
        epsilon0=float(epsilon0),
        touch_points=tuple(touches),
        growth_threshold=float(grid[a_idx]),
        iterations=iteration,
        patches=tuple(patches),
    )


def regularized_theta(result: MinorantResult, s: float) -> LogReal:
    """theta(s) = exp[lambda(log 1/s)] as a LogReal; s must map into the
    computed domain."""
    if not (0.0 < s < 1.0):
        raise DomainError(f"theta needs s in (0,1), got {s}")
    x = -math.log(s)
    lo, hi = result.domain
    if not (lo <= x <= hi):
        raise DomainError(f"log(1/s) = {x} outside computed domain [{lo}, {hi}]")
    q = float(result.q(x))
    return LogReal.from_log(q * q)


@dataclass(frozen=True)
class MinorantReport:
    checks: tuple[PropertyCheck, ...]

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> PropertyCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json_dict(self) -> dict:
        return {
            "all_pass": self.all_pass,
            "checks": [c.to_json_dict() for c in self.checks],
        }


def verify_minorant(result: MinorantResult) -> MinorantReport:
    """Check the six minorant properties, reporting worst margins.

    Margins are signed so that nonnegative (up to 1e-9 relative) passes:
    (a) minorant, (b) growth beyond the threshold, (c) derivative budget,
    (d) touch equality, (e) touch slope floor, (f) quadratic growth away
    from each touch point.  (f) is certified on the half-line where the
    tangent line to q at the touch point is nonnegative; left of that point
    the squared tangent exceeds q^2 and no bound of this shape can hold.
    """
    xs = result.xs
    v = result.q_values
    eps0 = result.epsilon0
    pl = result.q
    sample = result.is_sample
    checks: list[PropertyCheck] = []

    # (a) q <= Q at sample knots
    rel = (v[sample] - result.big_q[sample]) / result.big_q[sample]
    i = int(np.argmax(rel))
    checks.append(
        PropertyCheck(
            "minorant",
            bool(rel[i] <= _REL_TOL),
            float(-rel[i]),
            f"x={xs[sample][i]:.6g}",
        )
    )

    # (b) 2 log q >= eps0 x beyond the growth threshold
    beyond = xs >= result.growth_threshold
    gap = 2.0 * np.log(v[beyond]) - eps0 * xs[beyond]
    i = int(np.argmin(gap))
    checks.append(
        PropertyCheck(
            "growth_floor",
            bool(gap[i] >= -_REL_TOL),
            float(gap[i]),
            f"x={xs[beyond][i]:.6g}",
        )
    )

    # (c) right slope <= q^2/2 at every knot
    slopes = np.diff(v) / np.diff(xs)
    budget = 0.5 * v[:-1] * v[:-1]
    rel_c = (slopes - budget) / budget
    i = int(np.argmax(rel_c))
    checks.append(
        PropertyCheck(
            "derivative_budget",
            bool(rel_c[i] <= _REL_TOL),
            float(-rel_c[i]),
            f"x={xs[i]:.6g}",
        )
    )

    # (d) q = Q at each reported touch point
    if result.touch_points:
        worst_d, loc_d = -math.inf, ""
        for x_n in result.touch_points:
            j = int(np.searchsorted(xs, x_n))
            err = abs(v[j] - result.big_q[j]) / result.big_q[j]
            if err > worst_d:
                worst_d, loc_d = err, f"x_n={x_n:.6g}"
        checks.append(
            PropertyCheck("touch_equality", worst_d <= _REL_TOL, -worst_d, loc_d)
        )
    else:
        checks.append(PropertyCheck("touch_equality", False, -math.inf, "no touch points"))

    # (e) right slope >= eps0 q / 2 at touch points
    if result.touch_points:
        worst_e, loc_e = math.inf, ""
        for x_n in result.touch_points:
            j = int(np.searchsorted(xs, x_n))
            floor = 0.5 * eps0 * v[j]
            m = (pl.slope_right(j) - floor) / floor
            if m < worst_e:
                worst_e, loc_e = m, f"x_n={x_n:.6g}"
        checks.append(
            PropertyCheck("touch_slope_floor", worst_e >= -_REL_TOL, worst_e, loc_e)
        )
    else:
        checks.append(PropertyCheck("touch_slope_floor", False, -math.inf, "no touch points"))

    # (f) lambda(x) >= lambda_n + (x-x_n) lambda'_n + eps0/4 (x-x_n)^2 lambda'_n
    # on the half-line where the tangent line to q at x_n is nonnegative
    lam = v * v
    worst_f, loc_f, passed_f = math.inf, "", True
    for x_n in result.touch_points:
        j = int(np.searchsorted(xs, x_n))
        q_n = v[j]
        s_r = pl.slope_right(j)
        lam_n = q_n * q_n
        lam_p = 2.0 * q_n * s_r
        left_edge = x_n - q_n / s_r if s_r > 0.0 else xs[0]
        mask = xs >= left_edge
        dx = xs[mask] - x_n
        rhs = lam_n + dx * lam_p + 0.25 * eps0 * dx * dx * lam_p
        slack = (lam[mask] - rhs) / np.maximum(lam[mask], 1.0)
        i = int(np.argmin(slack))
        if slack[i] < worst_f:
            worst_f = float(slack[i])
            loc_f = f"x_n={x_n:.6g}, x={xs[mask][i]:.6g}"
    passed_f = bool(result.touch_points) and worst_f >= -_REL_TOL
    checks.append(
        PropertyCheck(
            "quadratic_growth_at_touch",
            passed_f,
            worst_f if result.touch_points else -math.inf,
            loc_f or "no touch points",
        )
    )

    return MinorantReport(tuple(checks))
