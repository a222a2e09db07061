"""Radial weights and the scalar data derived from them.

A weight omega is radial and decreasing on [0, 1) with values in (0, 1/e]
(the supremum only at the origin).  Everything the rest of the package
consumes comes from the single function

    Theta(s) = log 1/omega(1 - s),        s = 1 - t,

kept in the form Lambda(x) = log Theta(e^-x) so that doubly exponential
decay stays inside float range.  Moments

    Omega(n) = int_D |z|^(2n) omega(|z|) dm(z) = 2 int_0^1 r^(2n+1) omega(r) dr

are computed on a shared dyadic radial mesh and returned in log domain.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError
from .logdomain import LogReal
from .piecewise import PiecewiseLinear
from .quadrature import RadialMesh

__all__ = [
    "RadialWeight",
    "MomentSequence",
    "GrowthConditionReport",
    "MomentDecayReport",
    "theta_big",
    "lambda_big",
    "moment",
    "moments",
    "extend_bilateral",
    "tilde_weight",
    "check_growth_condition",
    "check_moment_decay",
    "moment_decay_weight_bound",
    "write_moments_csv",
    "read_sampled_weight_csv",
]

_FAMILIES = ("single_exp", "exp_exp", "sampled", "unit")


@dataclass(frozen=True)
class RadialWeight:
    """A radial decreasing weight, one of four families.

    single_exp(beta):  omega(t) = exp(-1/(1-t)^beta), beta >= 1.
    exp_exp(c, beta):  omega(t) = exp(-exp(c/(1-t)^beta)), c > 0, beta > 0.
    sampled:           log omega given on a radial grid, interpolated
                       piecewise-linearly in (log(1-t), log Theta).
    unit:              omega = 1, for quadrature calibration only; it has
                       Theta = 0 and every Theta-derived operation rejects it.

    epsilon0 is the growth exponent the derived checks and downstream
    regularization use; it lives on the weight because every consumer of the
    weight needs the same value.
    """

    family: str
    params: tuple[float, ...]
    epsilon0: float
    curve: PiecewiseLinear | None = None

    def __post_init__(self) -> None:
        if self.family not in _FAMILIES:
            raise DomainError(f"unknown weight family {self.family!r}")
        if self.family != "unit" and not (0.0 < self.epsilon0 < 1.0):
            raise DomainError(f"epsilon0 must lie in (0,1), got {self.epsilon0}")
        if (self.curve is not None) != (self.family == "sampled"):
            raise DomainError("curve is required exactly for the sampled family")

    @staticmethod
    def single_exp(beta: float, epsilon0: float) -> "RadialWeight":
        if beta < 1.0:
            raise DomainError(f"single_exp needs beta >= 1, got {beta}")
        return RadialWeight("single_exp", (float(beta),), float(epsilon0))

    @staticmethod
    def exp_exp(c: float, beta: float, epsilon0: float) -> "RadialWeight":
        if c <= 0.0 or beta <= 0.0:
            raise DomainError(f"exp_exp needs c > 0 and beta > 0, got c={c}, beta={beta}")
        return RadialWeight("exp_exp", (float(c), float(beta)), float(epsilon0))

    @staticmethod
    def sampled(
        one_minus_t: np.ndarray,
        log_omega: np.ndarray,
        epsilon0: float,
    ) -> "RadialWeight":
        """Build from samples of log omega on a grid in s = 1 - t.

        The stored curve is log Theta as a function of x = log 1/s, which is
        the only coordinate pair in which the family's structure (monotone,
        slowly varying) survives interpolation.  Knots must have omega < 1/e
        so that log Theta is defined, and omega nonincreasing in t.
        """
        s = np.asarray(one_minus_t, dtype=float)
        lw = np.asarray(log_omega, dtype=float)
        if s.shape != lw.shape or s.ndim != 1 or s.size < 2:
            raise DomainError("need matching 1-d arrays with at least 2 samples")
        if not (np.all(s > 0.0) and np.all(s <= 1.0)):
            raise DomainError("one_minus_t values must lie in (0, 1]")
        if np.any(lw >= -1.0):
            bad = float(s[np.argmax(lw)])
            raise DomainError(
                f"sampled weight must stay below 1/e (log omega < -1); "
                f"violated at 1-t = {bad}"
            )
        order = np.argsort(-s)
        x = -np.log(s[order])
        theta_log = np.log(-lw[order])
        if np.any(np.diff(theta_log) < 0.0):
            raise DomainError("sampled weight must be nonincreasing in t")
        curve = PiecewiseLinear(tuple(x), tuple(theta_log))
        return RadialWeight("sampled", (), float(epsilon0), curve)

    @staticmethod
    def unit() -> "RadialWeight":
        return RadialWeight("unit", (), 0.5)

    # -- internal evaluators ------------------------------------------------

    def lambda_at(self, x: np.ndarray | float) -> np.ndarray | float:
        """Lambda(x) = log Theta(e^-x).  Vectorized; no positivity gate."""
        if self.family == "single_exp":
            (beta,) = self.params
            return beta * np.asarray(x, dtype=float) if np.ndim(x) else beta * float(x)
        if self.family == "exp_exp":
            c, beta = self.params
            if np.ndim(x):
                with np.errstate(over="ignore"):
                    return c * np.exp(beta * np.asarray(x, dtype=float))
            try:
                return c * math.exp(beta * float(x))
            except OverflowError:
                return math.inf
        if self.family == "sampled":
            # the stored curve is log Theta as a function of x, i.e. Lambda
            assert self.curve is not None
            return self.curve(np.asarray(x, dtype=float) if np.ndim(x) else float(x))
        raise DomainError("the unit weight has Theta = 0; Lambda is undefined")

    def log_omega_at(self, r: np.ndarray) -> np.ndarray:
        """Natural log of omega at radii r in [0, 1).  -inf where Theta
        overflows double precision (the weight is then an exact float zero)."""
        r = np.asarray(r, dtype=float)
        if self.family == "unit":
            return np.zeros_like(r)
        s = 1.0 - r
        x = -np.log(s)
        lam = np.asarray(self.lambda_at(x), dtype=float)
        with np.errstate(over="ignore"):
            theta = np.exp(lam)
        return -theta

    @cached_property
    def _mesh(self) -> RadialMesh:
        return RadialMesh.build(s_floor=1e-8)

    @cached_property
    def _mesh_log_omega(self) -> np.ndarray:
        return self.log_omega_at(self._mesh.r)


def theta_big(w: RadialWeight, s: float) -> LogReal:
    """Theta(s) = log 1/omega(1-s) as a positive LogReal."""
    if not (0.0 < s < 1.0):
        raise DomainError(f"theta_big needs s in (0,1), got {s}")
    return LogReal.from_log(float(w.lambda_at(-math.log(s))))


def lambda_big(w: RadialWeight, x: float) -> float:
    """Lambda(x) = log Theta(e^-x) as a plain float.

    Rejects points where Theta <= 1: downstream regularization takes square
    roots of Lambda, so a nonpositive value is a usage error, not data.
    """
    if x < 0.0:
        raise DomainError(f"lambda_big needs x >= 0, got {x}")
    lam = float(w.lambda_at(x))
    if not lam > 0.0:
        raise DomainError(f"Theta <= 1 at x = {x} (Lambda = {lam})")
    return lam


@dataclass(frozen=True)
class MomentSequence:
    """Moments Omega(n) for 0 <= n <= max_n, in log domain.

    Log-convexity (Omega(n)^2 <= Omega(n-1) Omega(n+1)) is checked at
    construction within the quadrature tolerance; a violation means the
    quadrature broke down, not that the data is merely unusual.
    """

    values: dict[int, LogReal]
    max_n: int

    _LOGCONVEXITY_TOL = 1e-8

    def __post_init__(self) -> None:
        for n in range(self.max_n + 1):
            v = self.values.get(n)
            if v is None or v.sign != 1:
                raise DomainError(f"moment sequence needs positive Omega({n})")
        logs = [self.values[n].log_magnitude for n in range(self.max_n + 1)]
        for n in range(1, self.max_n):
            gap = 2.0 * logs[n] - logs[n - 1] - logs[n + 1]
            if gap > self._LOGCONVEXITY_TOL:
                raise DomainError(
                    f"log-convexity violated at n = {n} by {gap:.3e}; "
                    "moment quadrature is not trustworthy"
                )

    def __getitem__(self, n: int) -> LogReal:
        if n >= 0:
            if n > self.max_n:
                raise DomainError(f"Omega({n}) not computed (max_n = {self.max_n})")
            return self.values[n]
        return extend_bilateral(self, n)

    def log_values(self) -> np.ndarray:
        return np.array(
            [self.values[n].log_magnitude for n in range(self.max_n + 1)], dtype=float
        )


def moment(w: RadialWeight, n: int) -> LogReal:
    if n < 0:
        raise DomainError(f"moment needs n >= 0, got {n}; use extend_bilateral")
    return LogReal.from_log(w._mesh.log_moment(w._mesh_log_omega, n))


def moments(w: RadialWeight, max_n: int) -> MomentSequence:
    """All of Omega(0..max_n) in one mesh pass."""
    if max_n < 1:
        raise DomainError(f"moments needs max_n >= 1, got {max_n}")
    ns = np.arange(max_n + 1)
    logs = w._mesh.log_moments(w._mesh_log_omega, ns)
    values = {int(n): LogReal.from_log(float(v)) for n, v in zip(ns, logs)}
    return MomentSequence(values, max_n)


def extend_bilateral(m: MomentSequence, n: int) -> LogReal:
    """Omega(n) = 1/Omega(-n-1) for n < 0; exact in log domain."""
    if n >= 0:
        raise DomainError(f"extend_bilateral is for n < 0, got {n}")
    k = -n - 1
    if k > m.max_n:
        raise DomainError(f"Omega({n}) needs Omega({k}), beyond max_n = {m.max_n}")
    return LogReal.from_log(-m.values[k].log_magnitude)


def tilde_weight(w: RadialWeight, z_abs: float) -> LogReal:
    """The slowed-down companion weight at radius |z|:

        log 1/tilde = log 1/omega - [log log 1/omega]^2.

    Requires log 1/omega > 1 at the radius.  When log 1/omega overflows
    double precision the result saturates to an exact log-domain zero, which
    is the honest limit of the formula there.
    """
    if not (0.0 <= z_abs < 1.0):
        raise DomainError(f"tilde_weight needs |z| in [0,1), got {z_abs}")
    if w.family == "unit":
        raise DomainError("tilde_weight is undefined for the unit weight")
    s = 1.0 - z_abs
    lam = float(w.lambda_at(-math.log(s)))
    if not lam > 0.0:
        raise DomainError(
            f"log(1/omega) <= 1 at |z| = {z_abs}; tilde weight undefined there"
        )
    try:
        theta = math.exp(lam)
    except OverflowError:
        return LogReal.zero()
    return LogReal.from_log(-(theta - lam * lam))


@dataclass(frozen=True)
class GrowthConditionReport:
    """Samples of (1-t)^epsilon0 * loglog(1/omega) and the increasing-tail
    verdict.  threshold_index is the first index from which the quantity
    increases strictly to the end of the grid."""

    epsilon0: float
    t: tuple[float, ...]
    quantity: tuple[float, ...]
    threshold_index: int
    passed: bool

    def to_json_dict(self) -> dict:
        return {
            "check": "growth_condition",
            "epsilon0": self.epsilon0,
            "passed": self.passed,
            "quantity": list(self.quantity),
            "t": list(self.t),
            "threshold_index": self.threshold_index,
        }


def check_growth_condition(w: RadialWeight, t_grid: np.ndarray) -> GrowthConditionReport:
    """Does (1-t)^epsilon0 * loglog(1/omega(t)) increase toward t = 1?

    The limit being infinite is not testable; the desk-scale surrogate is a
    strictly increasing tail covering at least the last three grid points.
    """
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 4:
        raise DomainError("growth check needs a 1-d grid with at least 4 points")
    if np.any(np.diff(t) <= 0.0) or t[0] < 0.0 or t[-1] >= 1.0:
        raise DomainError("grid must be strictly increasing inside [0, 1)")
    s = 1.0 - t
    x = -np.log(s)
    lam = np.asarray(w.lambda_at(x), dtype=float)
    quantity = np.exp(w.epsilon0 * np.log(s)) * lam
    rising = np.diff(quantity) > 0.0
    threshold = 0
    for i in range(rising.size - 1, -1, -1):
        if not rising[i]:
            threshold = i + 1
            break
    passed = (t.size - threshold) >= 3
    return GrowthConditionReport(
        epsilon0=w.epsilon0,
        t=tuple(float(v) for v in t),
        quantity=tuple(float(v) for v in quantity),
        threshold_index=threshold,
        passed=passed,
    )


@dataclass(frozen=True)
class MomentDecayReport:
    """Verdict for Omega(n) <= exp[-n / (log(2+n))^alpha] over 0..max_n."""

    alpha: float
    max_n: int
    passed: bool
    worst_margin: float
    worst_n: int
    log_moments: tuple[float, ...]
    log_bounds: tuple[float, ...]

    def to_json_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "check": "moment_decay",
            "log_bounds": list(self.log_bounds),
            "log_moments": list(self.log_moments),
            "max_n": self.max_n,
            "passed": self.passed,
            "worst_margin": self.worst_margin,
            "worst_n": self.worst_n,
        }


def check_moment_decay(m: MomentSequence, alpha: float) -> MomentDecayReport:
    if alpha <= 0.0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    ns = np.arange(m.max_n + 1, dtype=float)
    log_bound = -ns / np.log(2.0 + ns) ** alpha
    log_m = m.log_values()
    margins = log_m - log_bound
    worst = int(np.argmax(margins))
    return MomentDecayReport(
        alpha=float(alpha),
        max_n=m.max_n,
        passed=bool(np.all(margins <= 0.0)),
        worst_margin=float(margins[worst]),
        worst_n=worst,
        log_moments=tuple(float(v) for v in log_m),
        log_bounds=tuple(float(v) for v in log_bound),
    )


def moment_decay_weight_bound(alpha: float, x: float, n_max: int = 10_000) -> LogReal:
    """Pointwise weight bound implied by the moment decay law:

        omega(x) <= min_n (n+1) exp[-n/(log(n+2))^alpha] / x^(2n+2).

    Minimized over 0 <= n <= n_max; callers probing radii very close to 1
    must raise n_max until the minimizer is interior (the function is convex
    in n, so interior means trustworthy).
    """
    if not (0.0 < x < 1.0):
        raise DomainError(f"bound needs x in (0,1), got {x}")
    if alpha <= 0.0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    ns = np.arange(n_max + 1, dtype=float)
    log_terms = (
        np.log(ns + 1.0)
        - ns / np.log(ns + 2.0) ** alpha
        - (2.0 * ns + 2.0) * math.log(x)
    )
    return LogReal.from_log(float(np.min(log_terms)))


# -- delimited I/O ----------------------------------------------------------


def write_moments_csv(m: MomentSequence, path: str) -> None:
    """Columns (n, log_moment), UTF-8, LF, header required."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["n", "log_moment"])
        for n in range(m.max_n + 1):
            writer.writerow([n, repr(m.values[n].log_magnitude)])


def read_sampled_weight_csv(path: str, epsilon0: float) -> RadialWeight:
    """Columns (one_minus_t, log_one_over_omega), UTF-8, LF, header required."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DomainError(f"{path}: empty weight CSV") from None
        if [h.strip() for h in header] != ["one_minus_t", "log_one_over_omega"]:
            raise DomainError(
                f"{path}: expected header one_minus_t,log_one_over_omega, got {header}"
            )
        s_vals: list[float] = []
        log_inv: list[float] = []
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise DomainError(f"{path}:{i}: expected 2 columns, got {len(row)}")
            s_vals.append(float(row[0]))
            log_inv.append(float(row[1]))
    return RadialWeight.sampled(
        np.array(s_vals), -np.array(log_inv), epsilon0
    )
