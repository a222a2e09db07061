"""Inductive construction of invertible functions with prescribed decay.

A construction state holds a radial weight, its regularized minorant, and a
finite stack of levels.  Level n contributes N_n rotated copies of one
harmonic building block, each pulled slightly off the boundary by a
contraction factor tau_n and boosted by a per-node exponent gamma in
[0, gamma_n].  The analytic completion

    W(z) = sum_n sum_k (1 + gamma_{n,k}) * H_n(tau_n * z * conj(zeta_{n,k}))

defines F = exp(W), which is zero free by construction.  The per-node
gammas are calibrated so that the mass of exp[(1+gamma) h_n - Theta] over
the concentration disk at the node equals exp(-V(zeta)) / (n^2 N_n); the
verification suite then measures, rather than assumes, the norm integrals,
the per-disk concentration band, the radial decay witnesses, and the
smoothness functional of F^(1/2).

Depth here is two or three levels with at most a few thousand nodes per
level.  Everything is deterministic: fixed reduction orders, fixed meshes,
fixed bisection schedules, so a rebuilt state serializes to identical
bytes.
"""

from __future__ import annotations

import json
import hashlib
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .blocks import BuildingBlock
from .convexreg import MinorantResult, regularize
from .errors import (
    BracketError,
    CertificationError,
    ConvergenceError,
    DomainError,
    QuadratureError,
)
from .logdomain import LogComplex, logsumexp, wrap_phase
from .piecewise import PiecewiseLinear
from .quadrature import DiskMesh, gauss_legendre_cell
from .reporting import CheckReport, PropertyCheck
from .rootfind import bisect_monotone
from .weights import RadialWeight

__all__ = [
    "LevelRecord",
    "ConstructionState",
    "DecayWitness",
    "initialize_construction",
    "select_eta",
    "select_next_x",
    "choose_gamma",
    "extend_state",
    "default_construction_config",
    "build_construction",
    "evaluate",
    "potential",
    "potential_stepwise",
    "log_derivative",
    "disk_masses",
    "verify_concentration",
    "verify_norm_integrals",
    "find_decay_points",
    "default_pair_config",
    "build_interleaved_pair",
    "verify_pair",
    "verify_smoothness",
    "weight_from_config",
    "state_to_json_dict",
    "state_hash",
    "dump_state",
    "load_state",
    "write_radial_profile_csv",
]

_TWO_PI = 2.0 * math.pi
_GOLDEN = 0.6180339887498949

# Plain float summation of the block terms overflows once a single term
# exceeds the double range; points that close to a node core are not
# meaningful evaluation targets at any scale we run.
_LOG_TERM_CAP = 690.0

# Dyadic ladder for the continuity scale, largest first.
_ETA_LADDER = tuple(0.5**j for j in range(1, 13))

# Relative tolerance (in the log) for the per-node mass equation.
_GAMMA_LOG_TOL = 5e-7

# Schedule window: least and largest admissible depth jump between levels.
_SCHEDULE_FLOOR = 4.0
_SCHEDULE_WINDOW = 0.87

# Entries per chunk when evaluating W on large point sets.
_CHUNK_ENTRIES = 4_000_000


# ---------------------------------------------------------------------------
# small numerics helpers


def _log1pexp(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    out = np.where(t > 35.0, t, np.log1p(np.exp(np.minimum(t, 35.0))))
    return out


def _log_abs_expm1(d: np.ndarray) -> np.ndarray:
    """log |exp(d) - 1| for complex d, stable in every regime.

    Uses |e^d - 1|^2 = expm1(Re d)^2 + 4 e^(Re d) sin^2(Im d / 2), which is
    free of cancellation; for Re d > 350 the answer is Re d to within an
    underflowed correction.
    """
    d = np.asarray(d, dtype=complex)
    m = d.real
    i = d.imag
    m_safe = np.minimum(m, 350.0)
    with np.errstate(divide="ignore"):
        core = 0.5 * np.log(
            np.expm1(m_safe) ** 2 + 4.0 * np.exp(m_safe) * np.sin(0.5 * i) ** 2
        )
    return np.where(m > 350.0, m, core)


def _softplus(t: float) -> float:
    if t > 35.0:
        return t + math.log1p(math.exp(-t))
    return math.log1p(math.exp(t))


def _axis_nodes(
    limit: float, sigma: float, gl_order: int
) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss nodes on [-limit, limit], refined at scale sigma
    around 0, with one spanning cell past 12 sigma where the integrands
    this serves have already decayed below exp(-70)."""
    edges = [0.0]
    for f in (0.5, 1.0, 2.0, 4.0, 8.0, 12.0):
        v = f * sigma
        if v < limit * (1.0 - 1e-12):
            edges.append(v)
        else:
            break
    edges.append(limit)
    ns = []
    ws = []
    for a, b in zip(edges[:-1], edges[1:]):
        n_, w_ = gauss_legendre_cell(a, b, gl_order)
        ns.append(n_)
        ws.append(w_)
    n_half = np.concatenate(ns)
    w_half = np.concatenate(ws)
    return (
        np.concatenate([-n_half[::-1], n_half]),
        np.concatenate([w_half[::-1], w_half]),
    )


def _node_disk_mesh(
    block: BuildingBlock, *, gl_order: int = 4
) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature offsets and log weights for a node's concentration disk.

    The integrand exp[(1+gamma) h - Theta] is constant over the disk only
    while exp(lam - 2 x_n) stays small; past that it is a Gaussian ridge of
    radial scale delta^2 / sqrt(1+G) and tangential scale delta^2 /
    sqrt(1+lam G), G = lam (lam'/lam)^2 exp(lam - 2 x_n).  The mesh is a
    disk-masked Cartesian product refined toward the node at exactly those
    scales, so one rule serves both regimes.  Weights are against
    dm = dx dy / pi and sum to delta^4; offsets are exact, so the caller
    keeps full precision next to the much larger center radius.
    """
    radius = block.delta_n * block.delta_n
    log_g = (
        math.log(block.lam_prime**2 / block.lam) + block.lam - 2.0 * block.x_n
    )
    sig_r = radius * math.exp(-0.5 * _softplus(log_g))
    sig_a = radius * math.exp(-0.5 * _softplus(log_g + math.log(block.lam)))
    t_nodes, t_w = _axis_nodes(radius, sig_r, gl_order)
    vs = []
    lws = []
    for ti, wi in zip(t_nodes, t_w):
        a_lim = math.sqrt(max(radius * radius - ti * ti, 0.0))
        a_nodes, a_w = _axis_nodes(a_lim, sig_a, gl_order)
        vs.append(ti + 1j * a_nodes)
        lws.append(math.log(wi / math.pi) + np.log(a_w))
    return np.concatenate(vs), np.concatenate(lws)


# ---------------------------------------------------------------------------
# state model


@dataclass(frozen=True)
class LevelRecord:
    """One completed level: the block, its node lattice, and the calibration.

    gammas is the per-node array actually used by the evaluator; the
    block's own gamma_used stays 0 and is not consulted.  clamped lists the
    node indices whose mass equation had no interior root, with the side
    taken.  The remaining fields are measurements recorded at extension
    time: the continuity scale eta certified before the level was added,
    the depth bound that was active, the increment constant, and the least
    angular gap to every older lattice.
    """

    n: int
    block: BuildingBlock
    count: int
    angle_offset: float
    gammas: np.ndarray
    clamped: tuple[tuple[int, str], ...]
    eta: float
    x_bound: float
    binding: str
    log_one_minus_tau: float
    c_increment: float
    min_cross_gap: float
    residual33: float

    def __post_init__(self) -> None:
        g = np.asarray(self.gammas, dtype=float)
        object.__setattr__(self, "gammas", g)
        if self.count < 1:
            raise DomainError(f"level {self.n} has no nodes")
        if g.shape != (self.count,):
            raise DomainError(
                f"level {self.n}: {g.shape[0] if g.ndim == 1 else g.shape} gammas for {self.count} nodes"
            )
        if not (0.0 <= self.angle_offset < 1.0):
            raise DomainError(f"angle offset must lie in [0,1), got {self.angle_offset}")
        cap = self.block.gamma_n * (1.0 + 1e-12)
        if np.any(g < 0.0) or np.any(g > cap):
            raise DomainError(f"level {self.n}: gamma outside [0, gamma_n]")
        if not self.log_one_minus_tau < -2.0 * self.block.x_n:
            raise DomainError(
                f"level {self.n}: 1 - tau = exp({self.log_one_minus_tau}) is not "
                f"small next to delta_n^2; the contraction would smear the nodes"
            )

    @property
    def x_n(self) -> float:
        return self.block.x_n

    @property
    def delta(self) -> float:
        return self.block.delta_n

    @property
    def r(self) -> float:
        return self.block.r_n

    @cached_property
    def node_angles(self) -> np.ndarray:
        return (np.arange(self.count) + self.angle_offset) * (_TWO_PI / self.count)

    @cached_property
    def zetas(self) -> np.ndarray:
        return np.exp(1j * self.node_angles)

    @property
    def centers(self) -> np.ndarray:
        return self.block.r_n * self.zetas

    def to_json_dict(self) -> dict:
        return {
            "angle_offset": self.angle_offset,
            "binding": self.binding,
            "c_increment": self.c_increment,
            "clamped": [[int(k), side] for k, side in self.clamped],
            "count": self.count,
            "eta": self.eta,
            "gammas": [float(g) for g in self.gammas],
            "lam": self.block.lam,
            "lam_prime": self.block.lam_prime,
            "log_one_minus_tau": self.log_one_minus_tau,
            "min_cross_gap": self.min_cross_gap,
            "n": self.n,
            "residual33": self.residual33,
            "x": self.block.x_n,
            "x_bound": self.x_bound,
        }


@dataclass(frozen=True)
class ConstructionState:
    """A weight, its minorant, and the levels built so far."""

    weight: RadialWeight
    minorant: MinorantResult
    kappa: float
    x_max: float
    knot_spacing: float
    levels: tuple[LevelRecord, ...] = ()

    def __post_init__(self) -> None:
        if not (0.0 < self.kappa < 1.0):
            raise DomainError(f"kappa must lie in (0,1), got {self.kappa}")
        xs = [lev.x_n for lev in self.levels]
        if any(b >= a for a, b in zip(xs[1:], xs[:-1])):
            raise DomainError("level depths must increase strictly")

    @property
    def epsilon0(self) -> float:
        return self.weight.epsilon0

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def total_nodes(self) -> int:
        return sum(lev.count for lev in self.levels)

    def truncated(self, depth: int) -> "ConstructionState":
        return replace(self, levels=self.levels[:depth])

    def theta_minorant(self, x: np.ndarray | float) -> np.ndarray | float:
        """exp of the regularized minorant exponent at depth x = log 1/s."""
        lam = self.minorant.lambda_at(np.asarray(x, dtype=float))
        out = np.exp(np.minimum(lam, 709.0))
        return float(out) if np.ndim(x) == 0 else out


def initialize_construction(
    weight: RadialWeight,
    *,
    kappa: float | None = None,
    x_max: float = 24.0,
    knot_spacing: float = 0.0625,
) -> ConstructionState:
    """Regularize the weight on a uniform depth grid and open a state.

    kappa defaults to exp(-1 - 2/epsilon0), the largest patch budget the
    disjointness margin supports.  The grid runs from the first knot where
    log Theta is positive up to x_max; every later depth selection picks
    touch points of the minorant certified on this grid.
    """
    if weight.family == "unit":
        raise DomainError("the unit weight has no growth to construct against")
    eps0 = weight.epsilon0
    if kappa is None:
        kappa = math.exp(-1.0 - 2.0 / eps0)
    if not knot_spacing > 0.0:
        raise DomainError(f"knot spacing must be positive, got {knot_spacing}")
    n_knots = int(math.floor(x_max / knot_spacing + 1e-9)) + 1
    xs = knot_spacing * np.arange(n_knots)
    lam = np.asarray(weight.lambda_at(xs), dtype=float)
    keep = lam > 0.0
    first = int(np.argmax(keep))
    if not keep[first]:
        raise DomainError("log Theta is nowhere positive on the grid")
    xs = xs[first:]
    if xs.size < 16:
        raise DomainError(
            f"only {xs.size} usable knots below x_max = {x_max}; raise x_max"
        )
    big_q = np.sqrt(lam[first:])
    minorant = regularize(xs, big_q, eps0)
    return ConstructionState(
        weight=weight,
        minorant=minorant,
        kappa=float(kappa),
        x_max=float(x_max),
        knot_spacing=float(knot_spacing),
    )


# ---------------------------------------------------------------------------
# evaluation core


def _level_terms(
    level: LevelRecord, zs: np.ndarray, *, derivative: bool = False
) -> np.ndarray:
    """Sum of the level's block terms at each point, as complex values.

    With derivative=True the term is the z derivative of the block's
    analytic completion instead.  Raises when a single term exceeds the
    double range: the point sits essentially on top of a contracted node.
    """
    b = level.block
    omt = math.exp(level.log_one_minus_tau)
    u = zs[:, None] * np.conj(level.zetas)[None, :]
    w = (1.0 - u) + omt * u
    log_abs_w = np.log(np.abs(w))
    log_mag = b.lam - b.lam_prime * (b.x_n + log_abs_w)
    if derivative:
        log_mag = log_mag - log_abs_w + math.log(b.lam_prime) + math.log1p(-omt)
    peak = float(log_mag.max()) if log_mag.size else -math.inf
    if peak > _LOG_TERM_CAP:
        j = int(np.unravel_index(int(np.argmax(log_mag)), log_mag.shape)[0])
        raise QuadratureError(
            f"block term at level {level.n} reaches exp({peak:.1f}) at "
            f"z = {complex(zs[j])}; the point is inside a node core",
            where="construction evaluation",
        )
    phase = np.arctan2(w.imag, w.real)
    if derivative:
        phase = -(b.lam_prime + 1.0) * phase - level.node_angles[None, :]
    else:
        phase = -b.lam_prime * phase
    terms = (1.0 + level.gammas)[None, :] * np.exp(log_mag) * np.exp(1j * phase)
    return terms.sum(axis=1)


def _w_sum(
    state: ConstructionState,
    zs: np.ndarray,
    *,
    depth: int | None = None,
    derivative: bool = False,
) -> np.ndarray:
    levels = state.levels if depth is None else state.levels[:depth]
    out = np.zeros(zs.shape, dtype=complex)
    if not levels:
        return out
    total = sum(lev.count for lev in levels)
    step = max(1, _CHUNK_ENTRIES // max(total, 1))
    for start in range(0, zs.size, step):
        sl = slice(start, start + step)
        for lev in levels:
            out[sl] += _level_terms(lev, zs[sl], derivative=derivative)
    return out


def _as_points(z: complex | np.ndarray) -> tuple[np.ndarray, bool]:
    arr = np.atleast_1d(np.asarray(z, dtype=complex))
    return arr, np.ndim(z) == 0


def potential(
    state: ConstructionState, z: complex | np.ndarray, *, depth: int | None = None
) -> float | np.ndarray:
    """V(z) = Re W(z) = log |F(z)|, on the closed disk.

    depth restricts the sum to the first levels, which is the running
    potential the selection steps certify against.
    """
    pts, scalar = _as_points(z)
    if np.any(np.abs(pts) > 1.0 + 1e-12):
        raise DomainError("potential is defined on the closed unit disk")
    vals = _w_sum(state, pts, depth=depth).real
    return float(vals[0]) if scalar else vals


def potential_stepwise(state: ConstructionState, z: complex) -> np.ndarray:
    """The running potentials V_1(z), ..., V_depth(z) accumulated level by
    level through an independent code path; used to cross-check the batched
    evaluator."""
    pts, _ = _as_points(z)
    if np.any(np.abs(pts) > 1.0 + 1e-12):
        raise DomainError("potential is defined on the closed unit disk")
    out = np.empty(state.depth)
    acc = 0.0
    for i, lev in enumerate(state.levels):
        acc = acc + float(_level_terms(lev, pts).real[0])
        out[i] = acc
    return out


def evaluate(state: ConstructionState, z: complex) -> LogComplex:
    """F(z) = exp(W(z)) in the log domain, for |z| < 1.

    F is zero free: the result always has a finite log magnitude.  The
    imaginary part of W vanishes at the origin, so F(0) > 0 and the branch
    of the logarithm is pinned there.
    """
    if not abs(z) < 1.0:
        raise DomainError(f"evaluate needs |z| < 1, got |z| = {abs(z)}")
    w = _w_sum(state, np.asarray([z], dtype=complex))[0]
    return LogComplex(float(w.real), wrap_phase(float(w.imag)))


def log_derivative(state: ConstructionState, z: complex) -> complex:
    """W'(z) = F'(z) / F(z) for |z| < 1."""
    if not abs(z) < 1.0:
        raise DomainError(f"log_derivative needs |z| < 1, got |z| = {abs(z)}")
    return complex(_w_sum(state, np.asarray([z], dtype=complex), derivative=True)[0])


# ---------------------------------------------------------------------------
# continuity scale


def _core_radius(level: LevelRecord, eps0: float) -> float:
    return level.delta * math.exp(2.0 / eps0)


def _eta_net(state: ConstructionState) -> list[tuple[np.ndarray, float]]:
    """Probe rings for the continuity certification, node cores excluded.

    Returns (points, ring radius) pairs.  The potential is harmonic, so its
    modulus peaks toward the boundary; the circle ring carries the finest
    resolution, backed by interior rings and one ring outside each level's
    patch band.
    """
    eps0 = state.epsilon0
    specs: list[tuple[float, int]] = [(1.0, 2048), (0.75, 512), (0.5, 512), (0.25, 512)]
    for lev in state.levels:
        gap = min(2.0 * _core_radius(lev, eps0), 0.25)
        count = min(4096, max(1024, 4 * lev.count))
        specs.append((1.0 - gap, count))
    rings: list[tuple[np.ndarray, float]] = []
    for radius, count in specs:
        ang = (np.arange(count) + 0.5) * (_TWO_PI / count)
        pts = radius * np.exp(1j * ang)
        keep = np.ones(count, dtype=bool)
        for lev in state.levels:
            core = _core_radius(lev, eps0)
            if 1.0 - radius >= core:
                continue
            spacing = _TWO_PI / lev.count
            rel = np.remainder(ang - lev.node_angles[0], spacing)
            arc = np.minimum(rel, spacing - rel)
            chord_sq = radius * radius + 1.0 - 2.0 * radius * np.cos(arc)
            keep &= chord_sq >= core * core
        if keep.any():
            rings.append((pts[keep], radius))
    return rings


def _net_modulus(
    rings: list[tuple[np.ndarray, float]], values: list[np.ndarray], eta: float
) -> float:
    """Largest |V(p) - V(q)| over net pairs closer than eta."""
    worst = 0.0
    for (pts, radius), vals in zip(rings, values):
        if pts.size < 2:
            continue
        ang = np.angle(pts)
        order = np.argsort(ang, kind="stable")
        a = ang[order]
        v = vals[order]
        half = min(1.0, eta / (2.0 * radius))
        arc_max = 2.0 * math.asin(half)
        for d in range(1, pts.size):
            gap = np.remainder(np.roll(a, -d) - a, _TWO_PI)
            close = gap <= arc_max
            if not close.any():
                break
            diff = np.abs(np.roll(v, -d) - v)[close]
            worst = max(worst, float(diff.max()))
    # cross-ring pairs on a thinned union
    thin_pts = []
    thin_vals = []
    for (pts, _), vals in zip(rings, values):
        stride = max(1, pts.size // 384)
        thin_pts.append(pts[::stride])
        thin_vals.append(vals[::stride])
    for i in range(len(rings)):
        for j in range(i + 1, len(rings)):
            if abs(rings[i][1] - rings[j][1]) >= eta:
                continue
            dist = np.abs(thin_pts[i][:, None] - thin_pts[j][None, :])
            close = dist < eta
            if close.any():
                diff = np.abs(thin_vals[i][:, None] - thin_vals[j][None, :])[close]
                worst = max(worst, float(diff.max()))
    return worst


def _certify_eta(
    rings: list[tuple[np.ndarray, float]],
    values: list[np.ndarray],
    *,
    ladder: Sequence[float] = _ETA_LADDER,
    floor: float = 0.0,
) -> float:
    sup_v = max((float(np.abs(v).max()) for v in values if v.size), default=0.0)
    for eta in ladder:
        if eta < floor:
            break
        if not sup_v < math.log(1.0 / eta):
            continue
        if _net_modulus(rings, values, eta) < 1.0:
            return eta
    raise DomainError(
        f"no admissible continuity scale: sup |V| = {sup_v:.3f} on the net and "
        f"no ladder value above the net resolution {floor:.2e} keeps the "
        f"modulus of continuity below 1"
    )


def select_eta(state: ConstructionState) -> float:
    """Largest dyadic eta whose continuity and modulus bounds hold for the
    current potential on a boundary-weighted probe net.

    Certifies |V(z) - V(w)| < 1 for net pairs with |z - w| < eta together
    with exp sup |V| < 1/eta.  The net excludes the core of every placed
    patch; the next level's depth bound absorbs that exclusion.  Raises
    when even the net's own resolution admits no ladder value.
    """
    rings = _eta_net(state)
    if not rings:
        raise DomainError("probe net is empty; node cores cover every ring")
    values = [potential(state, pts) for pts, _ in rings]
    floor = 2.0 * max(_TWO_PI * radius / pts.size for pts, radius in rings)
    return _certify_eta(rings, values, floor=floor)


# ---------------------------------------------------------------------------
# depth schedule


def select_next_x(
    state: ConstructionState,
    eta: float,
    n: int,
    touch_points: Sequence[float] | None = None,
) -> float:
    """Smallest admissible touch point for level n.

    Admissible means exp(-x) < eta * kappa * exp(-2n) strictly, at least
    the schedule floor above the previous level, and at most the window
    above it.  The returned depth is always a touch point of the minorant,
    so the block built there inherits the touch identities exactly.
    """
    if not (0.0 < eta <= 1.0):
        raise DomainError(f"eta must lie in (0,1], got {eta}")
    if touch_points is None:
        touch_points = state.minorant.touch_points
    touches = np.sort(np.asarray(touch_points, dtype=float))
    if touches.size == 0:
        raise DomainError("minorant has no touch points")
    bound = eta * state.kappa * math.exp(-2.0 * n)
    ok = np.exp(-touches) < bound
    if state.levels:
        prev = state.levels[-1].x_n
        ok &= touches >= prev + _SCHEDULE_FLOOR - 1e-12
    cand = touches[ok]
    if cand.size == 0:
        raise DomainError(
            f"no touch point below x_max = {state.x_max} satisfies the level-{n} "
            f"depth bound x > {-math.log(bound):.4f}; rebuild with a larger x_max"
        )
    x = float(cand[0])
    if state.levels:
        cap = state.levels[-1].x_n + _SCHEDULE_WINDOW + 2.0 / state.epsilon0
        if x > cap:
            raise DomainError(
                f"first admissible touch {x:.4f} overshoots the schedule window "
                f"ending at {cap:.4f}; refine the knot grid or deepen x_max"
            )
    return x


# ---------------------------------------------------------------------------
# per-node calibration


def _side_slopes(minorant: MinorantResult, x_n: float) -> tuple[float, float]:
    """Left and right slopes of the regularized q at the knot x_n."""
    xs = minorant.xs
    i = int(np.argmin(np.abs(xs - x_n)))
    if abs(float(xs[i]) - x_n) > 1e-9 * max(1.0, abs(x_n)):
        raise DomainError(f"depth {x_n} is not a knot of the regularized curve")
    q = minorant.q_values
    s_r = (
        float((q[i + 1] - q[i]) / (xs[i + 1] - xs[i]))
        if i + 1 < xs.size
        else float((q[i] - q[i - 1]) / (xs[i] - xs[i - 1]))
    )
    s_l = (
        float((q[i] - q[i - 1]) / (xs[i] - xs[i - 1])) if i > 0 else s_r
    )
    return s_l, s_r


def _disk_gap_terms(
    block: BuildingBlock, minorant: MinorantResult, v: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """(h - theta, log h) at offsets v from the node center, both resolved.

    theta is exp of the regularized exponent: the raw weight is the wrong
    comparison at node depth, where the knot-grid slope error already tilts
    the disk mass by theta * delta * (lam_prime - Lambda').  Even against
    the regularized curve the difference cannot be formed from separately
    exponentiated values: h and theta agree to one part in theta, far
    inside one ulp once the exponent passes ~36.  Instead the exponents
    are cancelled analytically.  With xi = x_s - x_n, the piecewise-linear
    q gives theta's exponent exactly as lam + 2 q sigma xi + sigma^2 xi^2
    on each side of the knot, and 2 q sigma_right is lam_prime itself, so

      log(h / theta) = lam_prime * log(s / |w|)
                       + (lam_prime - lam_prime_left) * min(xi, 0)
                       - sigma_side^2 * xi^2 + log cos(lam_prime arg w)

    where every factor is a small quantity computed with log1p-style
    arithmetic; h - theta = theta * expm1(...) then carries absolute error
    around theta * 1e-15, small against one nat.  The node's rotation and
    its boundary contraction are omitted: the rotation cancels from mass
    integrands, and the contraction shifts |w| by exp(-lam - 2x - 30),
    below float resolution of delta everywhere on the disk.
    """
    delta = block.delta_n
    lam = block.lam
    lp = block.lam_prime
    q_n = math.sqrt(lam)
    s_l, s_r = _side_slopes(minorant, block.x_n)
    lp_left = 2.0 * q_n * s_l
    sig_r = lp / (2.0 * q_n)
    t = v.real
    a = v.imag
    p = delta - t
    rpt = block.r_n + t
    drz = a * a / (rpt + np.sqrt(rpt * rpt + a * a))
    e2 = (a / p) ** 2
    log_s_over_w = np.log1p(-drz / p) - 0.5 * np.log1p(e2)
    xi = -(np.log1p(-t / delta) + np.log1p(-drz / p))
    psi = np.arctan2(-a, p)
    logcos = np.log1p(-2.0 * np.sin(0.5 * lp * psi) ** 2)
    right = xi >= 0.0
    a_side = np.where(right, lp, lp_left)
    b_side = np.where(right, sig_r * sig_r, s_l * s_l)
    lt = (
        lp * log_s_over_w
        + (lp - a_side) * xi
        - b_side * xi * xi
        + logcos
    )
    e_theta = lam + a_side * xi + b_side * xi * xi
    theta = np.exp(np.minimum(e_theta, 709.0))
    gap = theta * np.expm1(lt)
    zeta_w = -(np.log1p(-t / delta) + 0.5 * np.log1p(e2))
    log_h = lam + lp * zeta_w + logcos
    return gap, log_h


def _gamma_quadrature(
    block: BuildingBlock,
    minorant: MinorantResult,
    *,
    gl_order: int = 4,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(h, h - theta, log_w) on the disk |z - r_n| < delta_n^2.

    h is the block's harmonic part with no contraction and no rotation, the
    form the mass equation is stated in; h - theta comes from the
    difference-space expansion of _disk_gap_terms.  The mesh resolves the
    integrand's concentration scales, see _node_disk_mesh.
    """
    v, log_w = _node_disk_mesh(block, gl_order=gl_order)
    gap, log_h = _disk_gap_terms(block, minorant, v)
    return np.exp(np.minimum(log_h, 709.0)), gap, log_w


def _mass33_log(
    gammas: np.ndarray, h: np.ndarray, gap: np.ndarray, log_w: np.ndarray
) -> np.ndarray:
    """log of the disk mass at each gamma (vectorized over gammas).

    gamma * h is kept as its own term: folding it into (1 + gamma) * h
    would quantize the exponent in steps of ulp(1) * h, coarser than the
    solve tolerance whenever gamma is below ~1e-10.
    """
    g = np.atleast_1d(np.asarray(gammas, dtype=float))
    base = log_w + gap
    expo = base[None, :] + g[:, None] * h[None, :]
    m = expo.max(axis=1)
    return m + np.log(np.exp(expo - m[:, None]).sum(axis=1))


def _solve_gammas(
    h: np.ndarray,
    gap: np.ndarray,
    log_w: np.ndarray,
    log_targets: np.ndarray,
    cap: float,
) -> tuple[np.ndarray, list[tuple[int, str]]]:
    """Solve the mass equation for every node at once.

    The mass is strictly increasing in gamma (h > 0 on the disk), so each
    root is found by bisection in log gamma over a bracket seeded from the
    linearization mass(g) ~ mass(0) * exp(g * h_peak).  Nodes whose target
    escapes [mass(0), mass(cap)] are clamped to the near endpoint and
    flagged.
    """
    k_count = log_targets.size
    gammas = np.zeros(k_count)
    clamped: list[tuple[int, str]] = []
    j0 = float(_mass33_log(np.array([0.0]), h, gap, log_w)[0])
    jcap = float(_mass33_log(np.array([cap]), h, gap, log_w)[0])
    h_peak = float(h.max())
    lo_mask = log_targets <= j0 + _GAMMA_LOG_TOL
    hi_mask = log_targets >= jcap - _GAMMA_LOG_TOL
    for k in np.nonzero(lo_mask)[0]:
        if log_targets[k] < j0 - _GAMMA_LOG_TOL:
            clamped.append((int(k), "low"))
    for k in np.nonzero(hi_mask & ~lo_mask)[0]:
        gammas[k] = cap
        clamped.append((int(k), "high"))
    solve = ~(lo_mask | hi_mask)
    idx = np.nonzero(solve)[0]
    if idx.size:
        targets = log_targets[idx]
        guess = np.log(np.maximum((targets - j0) / h_peak, 1e-300))
        lo = guess - 40.0
        hi = np.full(idx.size, math.log(cap))
        base = log_w + gap
        chunk = max(1, _CHUNK_ENTRIES // max(h.size, 1))
        for start in range(0, idx.size, chunk):
            sl = slice(start, start + chunk)
            lo_c = lo[sl].copy()
            hi_c = hi[sl].copy()
            t_c = targets[sl]
            for _ in range(64):
                mid = 0.5 * (lo_c + hi_c)
                expo = base[None, :] + np.exp(mid)[:, None] * h[None, :]
                m = expo.max(axis=1)
                j_mid = m + np.log(np.exp(expo - m[:, None]).sum(axis=1))
                high = j_mid > t_c
                hi_c = np.where(high, mid, hi_c)
                lo_c = np.where(high, lo_c, mid)
            gammas[idx[sl]] = np.exp(0.5 * (lo_c + hi_c))
    return gammas, clamped


def _gamma_targets(
    state: ConstructionState, n: int, zetas: np.ndarray, count: int
) -> np.ndarray:
    v = _w_sum(state, zetas, depth=n - 1).real
    return -v - math.log(n * n * count)


def choose_gamma(state: ConstructionState, n: int, k: int) -> float:
    """Re-derive the calibrated gamma for node k of level n.

    Solves mass(gamma) = exp(-V(zeta)) / (n^2 N_n) by monotone bisection in
    log gamma, where V is the potential of the levels below n.  Targets
    outside the reachable mass range clamp to the near endpoint, matching
    the flags recorded at extension time.
    """
    if not 1 <= n <= state.depth:
        raise DomainError(f"level {n} not in state of depth {state.depth}")
    lev = state.levels[n - 1]
    if not 0 <= k < lev.count:
        raise DomainError(f"node {k} outside level {n} with {lev.count} nodes")
    h, gap, log_w = _gamma_quadrature(lev.block, state.minorant)
    target = float(
        _gamma_targets(state, n, lev.zetas[k : k + 1], lev.count)[0]
    )
    j0 = float(_mass33_log(np.array([0.0]), h, gap, log_w)[0])
    if abs(target - j0) <= _GAMMA_LOG_TOL or target < j0:
        return 0.0
    cap = lev.block.gamma_n
    jcap = float(_mass33_log(np.array([cap]), h, gap, log_w)[0])
    if target > jcap - _GAMMA_LOG_TOL:
        return cap
    lo = math.log(max((target - j0) / float(h.max()), 1e-300)) - 40.0

    def f(g: float) -> float:
        return float(_mass33_log(np.array([math.exp(g)]), h, gap, log_w)[0])

    res = bisect_monotone(f, lo, math.log(cap), target=target, tol=_GAMMA_LOG_TOL)
    return math.exp(res.x)


# ---------------------------------------------------------------------------
# extension


def _cross_gaps(
    angles: np.ndarray, older: LevelRecord
) -> float:
    """Least angular distance from the given angles to the older lattice."""
    spacing = _TWO_PI / older.count
    rel = np.remainder(angles - older.node_angles[0], spacing)
    arc = np.minimum(rel, spacing - rel)
    return float(arc.min())


def _pick_offset(
    state: ConstructionState, n: int, count: int
) -> tuple[float, float]:
    """Angular offset for the new lattice and its least cross-level gap.

    Level 1 sits at offset 0.  Later levels scan a deterministic candidate
    list and keep the offset maximizing the worst gap-to-floor ratio over
    all older lattices, where the floor for an older level of scale delta
    is exp(1.5) * delta: below that a foreign node sits inside the older
    node's immediate field and the mass targets degrade.
    """
    if not state.levels:
        return 0.0, math.inf
    candidates = [math.modf(n * _GOLDEN)[0]]
    candidates += [(2 * m + 1) / 32.0 for m in range(16)]
    candidates += [(2 * m + 1) / 64.0 for m in range(32)]
    best = None
    for phi in candidates:
        angles = (np.arange(count) + phi) * (_TWO_PI / count)
        score = math.inf
        gap_min = math.inf
        for older in state.levels:
            gap = _cross_gaps(angles, older)
            floor = math.exp(1.5) * older.delta
            score = min(score, gap / floor)
            gap_min = min(gap_min, gap)
        if best is None or score > best[0]:
            best = (score, phi, gap_min)
    score, phi, gap_min = best
    if score < 1.0:
        raise DomainError(
            f"no candidate offset keeps level {n} nodes exp(1.5)*delta away "
            f"from older lattices (best ratio {score:.3f}); the node counts "
            f"resonate, adjust kappa"
        )
    return phi, gap_min


def _increment_constant(
    rec: LevelRecord, state: ConstructionState
) -> float:
    """Measured C with |Re increment| <= C * delta_n inside the patch-free
    region |z| <= 1 - delta_n e^(2/eps0)."""
    eps0 = state.epsilon0
    rho_edge = 1.0 - min(_core_radius(rec, eps0), 0.5)
    worst = 0.0
    count = min(8192, max(256, 4 * rec.count))
    for rho in (rho_edge, 0.9 * rho_edge, 0.7, 0.4, 0.1):
        ang = (np.arange(count) + 0.5) * (_TWO_PI / count)
        vals = _level_terms(rec, rho * np.exp(1j * ang)).real
        worst = max(worst, float(np.abs(vals).max()))
    return worst / rec.delta


def extend_state(
    state: ConstructionState,
    *,
    x: float | None = None,
    flag_limit: int = 0,
) -> ConstructionState:
    """Append the next level: certify eta, pick the depth, place the
    lattice, calibrate every node, and record the measurements.

    An explicit x must still be a touch point satisfying the depth bound
    and the schedule floor.  More than flag_limit clamped mass equations
    aborts the extension; the default build expects none.
    """
    n = state.depth + 1
    eta = select_eta(state)
    bound = eta * state.kappa * math.exp(-2.0 * n)
    x_bound = -math.log(bound)
    if x is None:
        x_n = select_next_x(state, eta, n)
    else:
        x_n = float(x)
        if not math.exp(-x_n) < bound:
            raise DomainError(
                f"explicit depth x = {x_n} misses the level-{n} bound x > {x_bound:.4f}"
            )
        if state.levels and x_n < state.levels[-1].x_n + _SCHEDULE_FLOOR - 1e-12:
            raise DomainError(
                f"explicit depth x = {x_n} is inside the schedule floor "
                f"{state.levels[-1].x_n + _SCHEDULE_FLOOR:.4f}"
            )
    floor_sched = (
        state.levels[-1].x_n + _SCHEDULE_FLOOR if state.levels else -math.inf
    )
    binding = "depth-window" if x_bound >= floor_sched else "schedule-floor"
    block = BuildingBlock.from_touch(state.minorant, x_n)
    count = int(math.floor(state.kappa / block.delta_n))
    if count < 1:
        raise DomainError(
            f"kappa = {state.kappa} admits no nodes at depth {x_n}; deepen the level"
        )
    core = _core_radius_block(block, state.epsilon0)
    spacing_chord = 2.0 * math.sin(math.pi / count)
    if not 2.0 * core < spacing_chord:
        raise DomainError(
            f"level-{n} patches of diameter {2 * core:.3e} overlap at spacing "
            f"{spacing_chord:.3e}; kappa is too large for epsilon0"
        )
    offset, cross_gap = _pick_offset(state, n, count)
    angles = (np.arange(count) + offset) * (_TWO_PI / count)
    zetas = np.exp(1j * angles)
    log_targets = _gamma_targets(state, n, zetas, count)
    h, gap, log_w = _gamma_quadrature(block, state.minorant)
    gammas, clamped = _solve_gammas(h, gap, log_w, log_targets, block.gamma_n)
    if len(clamped) > flag_limit:
        raise BracketError(
            f"{len(clamped)} of {count} node mass equations had no interior "
            f"root at level {n} (limit {flag_limit}); the lattice collides "
            f"with an older level"
        )
    solved = _mass33_log(gammas, h, gap, log_w)
    residual = float(np.abs(solved - log_targets).max()) if count else 0.0
    unclamped = np.ones(count, dtype=bool)
    for k, _ in clamped:
        unclamped[k] = False
    if unclamped.any():
        residual = float(np.abs((solved - log_targets)[unclamped]).max())
    if residual > 2.0 * _GAMMA_LOG_TOL:
        raise ConvergenceError(
            f"mass equation residual {residual:.2e} exceeds tolerance at level {n}"
        )
    log_omt = -min(block.lam + 2.0 * x_n + 30.0, 700.0)
    rec = LevelRecord(
        n=n,
        block=block,
        count=count,
        angle_offset=offset,
        gammas=gammas,
        clamped=tuple(clamped),
        eta=eta,
        x_bound=x_bound,
        binding=binding,
        log_one_minus_tau=log_omt,
        c_increment=0.0,
        min_cross_gap=cross_gap,
        residual33=residual,
    )
    c_inc = _increment_constant(rec, state)
    rec = replace(rec, c_increment=c_inc)
    new_state = replace(state, levels=state.levels + (rec,))
    origin = _w_sum(new_state, np.zeros(1, dtype=complex))[0]
    if origin.imag != 0.0:
        raise CertificationError(
            f"Im W(0) = {origin.imag} after level {n}; the rotated terms "
            f"must be exactly real at the origin"
        )
    return new_state


def _core_radius_block(block: BuildingBlock, eps0: float) -> float:
    return block.delta_n * math.exp(2.0 / eps0)


# ---------------------------------------------------------------------------
# configuration plumbing


def default_construction_config() -> dict:
    """The reference two-level construction used across the test suite.

    The depth grid runs to 32 so that the weight's growth exponent clears
    the regularizer's threshold, which for these parameters happens near
    x = 30.6; the levels themselves sit far shallower.
    """
    return {
        "weight": {"family": "exp_exp", "params": [0.4, 0.28], "epsilon0": 0.25},
        "kappa": None,
        "levels": 2,
        "x_schedule": None,
        "x_max": 32.0,
        "knot_spacing": 0.0625,
        "flag_limit": 0,
    }


def weight_from_config(cfg: dict) -> RadialWeight:
    family = cfg.get("family")
    eps0 = float(cfg.get("epsilon0", 0.0))
    params = [float(p) for p in cfg.get("params", [])]
    if family == "exp_exp":
        if len(params) != 2:
            raise DomainError("exp_exp weight needs params [c, beta]")
        return RadialWeight.exp_exp(params[0], params[1], eps0)
    if family == "single_exp":
        if len(params) != 1:
            raise DomainError("single_exp weight needs params [beta]")
        return RadialWeight.single_exp(params[0], eps0)
    if family == "sampled":
        xs = np.asarray(cfg.get("knots_x", []), dtype=float)
        ys = np.asarray(cfg.get("knots_log_theta", []), dtype=float)
        if xs.size < 2:
            raise DomainError("sampled weight needs knots_x and knots_log_theta")
        return RadialWeight("sampled", (), eps0, curve=PiecewiseLinear(xs, ys))
    raise DomainError(f"unknown weight family {family!r} in config")


def _weight_to_config(weight: RadialWeight) -> dict:
    cfg: dict = {
        "family": weight.family,
        "params": [float(p) for p in weight.params],
        "epsilon0": weight.epsilon0,
    }
    if weight.family == "sampled":
        cfg["knots_x"] = [float(v) for v in weight.curve.xs]
        cfg["knots_log_theta"] = [float(v) for v in weight.curve.ys]
    return cfg


def build_construction(config: dict | None = None) -> ConstructionState:
    """Build a full state from a config dict (missing keys take defaults)."""
    cfg = default_construction_config()
    if config:
        cfg.update(config)
    weight = weight_from_config(cfg["weight"])
    state = initialize_construction(
        weight,
        kappa=cfg.get("kappa"),
        x_max=float(cfg.get("x_max", 24.0)),
        knot_spacing=float(cfg.get("knot_spacing", 0.0625)),
    )
    schedule = cfg.get("x_schedule")
    flag_limit = int(cfg.get("flag_limit", 0))
    if schedule is not None:
        for x in schedule:
            state = extend_state(state, x=float(x), flag_limit=flag_limit)
        return state
    for _ in range(int(cfg.get("levels", 2))):
        state = extend_state(state, flag_limit=flag_limit)
    return state


# ---------------------------------------------------------------------------
# disk masses and concentration


def _disk_logmass(
    state: ConstructionState,
    n: int,
    ks: np.ndarray,
    *,
    gamma_override: np.ndarray | None = None,
) -> np.ndarray:
    """log mass of exp[V - theta] over the concentration disk of each node,
    with theta the regularized exponent and the own block's h - theta from
    the difference-space expansion (see _disk_gap_terms for why neither the
    raw weight nor value-domain subtraction survives at node depth).

    The own block and the exponent are integrated on the exact-offset mesh
    of _node_disk_mesh; every other node's term is evaluated once at the
    disk center, since no foreign scale comes within six orders of magnitude
    of the disk radius delta^2 and the resulting variation stays under 1e-6.
    gamma_override substitutes per-node exponents for the own block only,
    leaving the surrounding field as built.
    """
    ks = np.asarray(ks, dtype=int)
    lev = state.levels[n - 1]
    b = lev.block
    v, log_w = _node_disk_mesh(b)
    gap, log_h = _disk_gap_terms(b, state.minorant, v)
    h_own = np.exp(np.minimum(log_h, 709.0))

    # surrounding field at each center, own node's term removed exactly
    centers = b.r_n * lev.zetas[ks]
    v_rest = np.zeros(ks.size)
    for m, other in enumerate(state.levels, start=1):
        omt = math.exp(other.log_one_minus_tau)
        u = centers[:, None] * np.conj(other.zetas)[None, :]
        w = (1.0 - u) + omt * u
        log_mag = other.block.lam - other.block.lam_prime * (
            other.block.x_n + np.log(np.abs(w))
        )
        if m == n:
            log_mag[np.arange(ks.size), ks] = -math.inf
        terms = (1.0 + other.gammas)[None, :] * np.exp(log_mag) * np.cos(
            -other.block.lam_prime * np.arctan2(w.imag, w.real)
        )
        v_rest += terms.sum(axis=1)

    gam = lev.gammas[ks] if gamma_override is None else np.asarray(
        gamma_override, dtype=float
    )[ks]
    expo = (log_w + gap)[None, :] + gam[:, None] * h_own[None, :]
    peak = expo.max(axis=1)
    mass = peak + np.log(np.exp(expo - peak[:, None]).sum(axis=1))
    return mass + v_rest


def disk_masses(state: ConstructionState) -> tuple[np.ndarray, ...]:
    """Per-level arrays of log disk masses of exp[V - theta], all nodes,
    against the regularized exponent.

    These are the point masses the weighted integrals of |F| concentrate
    into; the norm and concentration checks, and the inner-product spikes
    downstream, all consume the same numbers.
    """
    out = []
    for lev in state.levels:
        out.append(_disk_logmass(state, lev.n, np.arange(lev.count)))
    return tuple(out)


def verify_concentration(
    state: ConstructionState,
    n: int | None = None,
    k: int | None = None,
    *,
    c_pin: float = 10.0,
    trend_band: float = 10.0,
) -> CheckReport:
    """Check that each node's disk carries mass 1/(n^2 N_n) up to c_pin and
    that whole levels aggregate to 1/n^2 up to trend_band.

    The constant actually achieved is reported per level; the pinned bound
    is the acceptance band, not a tuning input.
    """
    if state.depth == 0:
        raise DomainError("state has no levels to verify")
    level_indices = range(1, state.depth + 1) if n is None else [n]
    checks: list[PropertyCheck] = []
    data: dict = {"majorant": "theta-minorant", "c_pin": c_pin}
    for ln in level_indices:
        lev = state.levels[ln - 1]
        ks = np.arange(lev.count) if k is None else np.asarray([k])
        logmass = _disk_logmass(state, ln, ks)
        log_ratio = logmass + math.log(ln * ln * lev.count)
        worst = float(np.abs(log_ratio).max())
        worst_k = int(ks[int(np.argmax(np.abs(log_ratio)))])
        checks.append(
            PropertyCheck(
                name=f"disk-mass-band-level-{ln}",
                passed=worst <= math.log(c_pin),
                margin=math.log(c_pin) - worst,
                location=f"level {ln}, node {worst_k}",
            )
        )
        data[f"level_{ln}_c_measured"] = math.exp(worst)
        data[f"level_{ln}_worst_node"] = worst_k
        if k is None:
            agg = float(logsumexp(logmass)) + 2.0 * math.log(ln)
            checks.append(
                PropertyCheck(
                    name=f"level-mass-trend-level-{ln}",
                    passed=abs(agg) <= math.log(trend_band),
                    margin=math.log(trend_band) - abs(agg),
                    location=f"level {ln} aggregate",
                )
            )
            data[f"level_{ln}_log_mass"] = float(logsumexp(logmass))
    subject = {
        "kind": "construction",
        "depth": state.depth,
        "x": [lev.x_n for lev in state.levels],
        "weight": state.weight.family,
    }
    return CheckReport(
        lemma="construction-concentration",
        subject=subject,
        checks=tuple(checks),
        data=data,
    )


# ---------------------------------------------------------------------------
# norm integrals


def verify_norm_integrals(
    state: ConstructionState,
    *,
    inverse_slack: float = 10.0,
    trend_band: float = 10.0,
    base_angular: int = 256,
    angular_cap: int = 8192,
) -> CheckReport:
    """Measure the weighted norm integral of |F| and of 1/|F|.

    The integral of |F| splits into a background quadrature on a disk mesh
    plus the per-node disk masses: the background mesh cannot resolve the
    delta^2 concentration disks, and does not need to, because those
    masses are exactly what the calibration fixed.  The inverse integral
    runs against the companion weight exp[-theta + lambda^2].  Both use
    the regularized exponent, the curve the whole construction is pinned
    to; at node depths the raw weight differs from it by far more than one
    nat in the exponent, so mixing the two curves would swamp every band
    here with grid error.  Both integrals are truncated at 2.5 depth units
    past the deepest level, which is where the deepest resolved annulus
    ends; the truncation depth is reported.
    """
    if state.depth == 0:
        raise DomainError("state has no levels to verify")
    deepest = state.levels[-1].x_n
    x_trunc = min(state.x_max, deepest + 2.5)
    shells = [
        (lev.delta, min(angular_cap, max(base_angular, 4 * lev.count)))
        for lev in state.levels
    ]
    mesh = DiskMesh.build(
        math.exp(-x_trunc),
        base_angular=base_angular,
        shells=shells,
        angular_cap=angular_cap,
    )
    s = 1.0 - mesh.r
    x_mesh = -np.log(s)
    lam = np.asarray(state.minorant.lambda_at(x_mesh), dtype=float)
    theta = np.exp(np.minimum(lam, 709.0))

    # drop background points that stray into a concentration disk; their
    # mass is carried by the local quadratures
    keep = np.ones(mesh.z.size, dtype=bool)
    dropped = 0
    for lev in state.levels:
        band = np.abs(s - lev.delta) < 4.0 * lev.delta * lev.delta
        if not band.any():
            continue
        ang = np.angle(mesh.z[band])
        spacing = _TWO_PI / lev.count
        rel = np.remainder(ang - lev.node_angles[0], spacing)
        arc = np.minimum(rel, spacing - rel)
        hit = arc * mesh.r[band] < 3.0 * lev.delta * lev.delta
        if hit.any():
            sub = np.nonzero(band)[0][hit]
            keep[sub] = False
            dropped += int(hit.sum())

    v = _w_sum(state, mesh.z[keep]).real
    log_bg = float(logsumexp(mesh.log_w[keep] + v - theta[keep]))
    level_masses = disk_masses(state)
    log_disks = [float(logsumexp(lm)) for lm in level_masses]
    log_total = float(logsumexp(np.asarray([log_bg] + log_disks)))

    inv_expo = mesh.log_w[keep] - v - theta[keep] + lam[keep] ** 2
    log_inv = float(logsumexp(inv_expo))

    checks: list[PropertyCheck] = [
        PropertyCheck(
            name="norm-integral-finite",
            passed=math.isfinite(log_total),
            margin=700.0 - log_total,
            location="truncated disk",
        ),
        PropertyCheck(
            name="inverse-integral-finite",
            passed=math.isfinite(log_inv),
            margin=700.0 - log_inv,
            location="truncated disk, companion weight",
        ),
        PropertyCheck(
            name="disk-sum-within-total",
            passed=log_total >= float(logsumexp(np.asarray(log_disks))) - 1e-12,
            margin=log_total - float(logsumexp(np.asarray(log_disks))),
            location="disk masses vs total",
        ),
    ]
    trend_worst = -math.inf
    for lev, lm in zip(state.levels, log_disks):
        dev = abs(lm + 2.0 * math.log(lev.n))
        trend_worst = max(trend_worst, dev)
    checks.append(
        PropertyCheck(
            name="shell-trend",
            passed=trend_worst <= math.log(trend_band),
            margin=math.log(trend_band) - trend_worst,
            location="per-level shell masses vs 1/n^2",
        )
    )
    if len(log_disks) >= 2:
        dec = min(a - b for a, b in zip(log_disks[:-1], log_disks[1:]))
        checks.append(
            PropertyCheck(
                name="shells-decreasing",
                passed=dec > 0.0,
                margin=dec,
                location="consecutive levels",
            )
        )
    inv_worst = -math.inf
    inv_margin = math.inf
    for lev in state.levels:
        band = keep & (np.abs(x_mesh - lev.x_n) < 2.0)
        if not band.any():
            continue
        part = float(
            logsumexp(mesh.log_w[band] - _w_sum(state, mesh.z[band]).real
                      - theta[band] + lam[band] ** 2)
        )
        bound = math.log(inverse_slack) - 2.0 * math.log(lev.n)
        inv_margin = min(inv_margin, bound - part)
        inv_worst = max(inv_worst, part - bound)
    checks.append(
        PropertyCheck(
            name="inverse-shells",
            passed=inv_worst <= 0.0,
            margin=inv_margin,
            location="per-level annuli, companion weight",
        )
    )
    data = {
        "log_norm_integral": log_total,
        "log_background": log_bg,
        "log_inverse_integral": log_inv,
        "log_shell_masses": log_disks,
        "x_truncation": x_trunc,
        "mesh_points": int(mesh.z.size),
        "dropped_points": dropped,
        "majorant": "theta-minorant; inverse against exp[-theta + lambda^2]",
    }
    subject = {
        "kind": "construction",
        "depth": state.depth,
        "x": [lev.x_n for lev in state.levels],
        "weight": state.weight.family,
    }
    return CheckReport(
        lemma="construction-norms", subject=subject, checks=tuple(checks), data=data
    )


# ---------------------------------------------------------------------------
# decay witnesses


@dataclass(frozen=True)
class DecayWitness:
    """A point deep in a level's annulus where log |F| dips below the
    minorant threshold.  found=False entries record the best value seen."""

    level: int
    point: complex
    one_minus_abs: float
    log_abs_f: float
    theta_delta: float
    found: bool

    @property
    def passed_dip(self) -> bool:
        return self.log_abs_f < -(2.0 / 3.0) * self.theta_delta

    @property
    def passed_witness(self) -> bool:
        return self.log_abs_f <= -0.5 * self.theta_delta

    def to_json_dict(self) -> dict:
        return {
            "found": self.found,
            "level": self.level,
            "log_abs_f": self.log_abs_f,
            "one_minus_abs": self.one_minus_abs,
            "point": [self.point.real, self.point.imag],
            "theta_delta": self.theta_delta,
        }


def find_decay_points(
    state: ConstructionState,
    *,
    depth_steps: int = 12,
    angle_steps: int = 18,
) -> list[DecayWitness]:
    """One decay witness per level, searched inside the level's annulus.

    A node's term at boundary distance s and angular offset a contributes
    theta * (delta / |w|)^lam_prime * cos(lam_prime * atan(a / s)), so it
    turns negative once lam_prime * atan(a / s) passes pi/2: the dip sits
    at offsets proportional to the probe's own boundary distance, not at a
    fixed angle.  The search sweeps the phase lam_prime * atan(a / s)
    through the negative lobe at depths just inside the ring, near three
    nodes, and keeps the deepest potential; a level whose best value
    misses the witness threshold log |F| <= -theta(delta)/2 yields a
    found=False entry rather than an exception.
    """
    if state.depth == 0:
        raise DomainError("state has no levels to search")
    out: list[DecayWitness] = []
    for lev in state.levels:
        b = lev.block
        theta_delta = float(state.theta_minorant(b.x_n))
        t_grid = b.delta_n * np.linspace(0.52, 0.97, depth_steps)
        scales = np.linspace(0.6, 1.45, angle_steps)
        # phase targets capped below pi/2: atan is bounded, so shallow
        # slopes cannot push the phase past lam_prime * pi / 2 at any angle
        psi = np.minimum(scales * (math.pi / b.lam_prime), 1.55)
        slope = np.tan(psi)
        node_ids = sorted({0, lev.count // 3, (2 * lev.count) // 3})
        best_v = math.inf
        best_z = 0.0 + 0.0j
        best_t = float(t_grid[0])
        for kid in node_ids:
            alpha = lev.node_angles[kid]
            for sign in (1.0, -1.0):
                offs = sign * t_grid[:, None] * slope[None, :]
                zs = (1.0 - t_grid)[:, None] * np.exp(1j * (alpha + offs))
                vals = _w_sum(state, zs.ravel()).real.reshape(zs.shape)
                j = int(np.argmin(vals))
                jj = np.unravel_index(j, vals.shape)
                if float(vals[jj]) < best_v:
                    best_v = float(vals[jj])
                    best_z = complex(zs[jj])
                    best_t = float(t_grid[jj[0]])
        found = best_v <= -0.5 * theta_delta
        out.append(
            DecayWitness(
                level=lev.n,
                point=best_z,
                one_minus_abs=best_t,
                log_abs_f=best_v,
                theta_delta=theta_delta,
                found=found,
            )
        )
    return out


# ---------------------------------------------------------------------------
# interleaved pairs


def default_pair_config() -> dict:
    """Two interleaved two-level schedules over one shared weight.

    The second family runs one depth unit below the first at both levels,
    which keeps the families' node counts commensurate while the foreign
    potential at each family's disks stays exponentially under the decay
    envelope; the margins are verified, never assumed.
    """
    return {
        "weight": {"family": "exp_exp", "params": [0.62, 0.28], "epsilon0": 0.25},
        "kappa": None,
        "x_schedules": [[11.75, 15.75], [12.75, 16.75]],
        "x_max": 24.0,
        "knot_spacing": 0.0625,
        "flag_limit": 0,
    }


def build_interleaved_pair(
    config: dict | None = None,
) -> tuple[ConstructionState, ConstructionState]:
    """Build two constructions whose level radii interleave.

    The schedules must alternate strictly: x_{1,n} < x_{2,n} < x_{1,n+1}.
    Both families share the weight and the regularized minorant.  The pair
    is verified before it is returned; a failed margin raises instead of
    handing back an uncertified pair.
    """
    cfg = default_pair_config()
    if config:
        cfg.update(config)
    schedules = cfg.get("x_schedules")
    if not schedules or len(schedules) != 2:
        raise DomainError("pair config needs x_schedules = [family1, family2]")
    xs1 = [float(v) for v in schedules[0]]
    xs2 = [float(v) for v in schedules[1]]
    if len(xs1) != len(xs2) or not xs1:
        raise DomainError("pair schedules must have equal positive length")
    merged = []
    for a, b in zip(xs1, xs2):
        merged += [a, b]
    if any(u >= w for u, w in zip(merged, merged[1:])):
        raise DomainError(
            f"schedules are not interleaved: need x1_n < x2_n < x1_(n+1), got "
            f"{xs1} and {xs2}"
        )
    base = {
        "weight": cfg["weight"],
        "kappa": cfg.get("kappa"),
        "x_max": cfg.get("x_max", 24.0),
        "knot_spacing": cfg.get("knot_spacing", 0.0625),
        "flag_limit": cfg.get("flag_limit", 0),
    }
    state_1 = build_construction({**base, "x_schedule": xs1})
    state_2 = build_construction({**base, "x_schedule": xs2})
    report = verify_pair(state_1, state_2)
    if not report.all_pass:
        failing = [c.name for c in report.checks if not c.passed]
        raise CertificationError(
            f"interleaved pair failed verification: {', '.join(failing)}"
        )
    return state_1, state_2


def verify_pair(
    state_1: ConstructionState,
    state_2: ConstructionState,
    *,
    c_pin: float = 10.0,
) -> CheckReport:
    """Concentration for each family plus cross-family smallness.

    Cross smallness asks, at every disk center of the other family, that
    log |F_j| minus theta at the foreign scale stays below -1/t with
    t the foreign level's delta: each function is negligible exactly where
    its partner concentrates.
    """
    if _weight_to_config(state_1.weight) != _weight_to_config(state_2.weight):
        raise DomainError("pair families must share one weight")
    xs1 = [lev.x_n for lev in state_1.levels]
    xs2 = [lev.x_n for lev in state_2.levels]
    merged = [v for pair in zip(xs1, xs2) for v in pair]
    inter_margin = min(b - a for a, b in zip(merged, merged[1:]))
    checks: list[PropertyCheck] = [
        PropertyCheck(
            name="schedules-interleaved",
            passed=inter_margin > 0.0,
            margin=inter_margin,
            location="merged depth schedule",
        )
    ]
    data: dict = {
        "x_family_1": xs1,
        "x_family_2": xs2,
        "majorant": "theta-minorant",
        "c_pin": c_pin,
    }
    for fam, state in ((1, state_1), (2, state_2)):
        rep = verify_concentration(state, c_pin=c_pin)
        worst = min(c.margin for c in rep.checks)
        checks.append(
            PropertyCheck(
                name=f"family-{fam}-concentration",
                passed=rep.all_pass,
                margin=worst,
                location=f"family {fam}, all nodes",
            )
        )
        for key in rep.data:
            if key.endswith("c_measured"):
                data[f"family_{fam}_{key}"] = rep.data[key]
    for fam, mine, foreign in ((1, state_1, state_2), (2, state_2, state_1)):
        worst_margin = math.inf
        for lev in foreign.levels:
            t = lev.delta
            theta_t = float(mine.theta_minorant(lev.x_n))
            vals = potential(mine, lev.centers)
            margin = float((theta_t - 1.0 / t - vals).min())
            worst_margin = min(worst_margin, margin)
            data[f"family_{fam}_on_foreign_level_{lev.n}_margin"] = margin
        checks.append(
            PropertyCheck(
                name=f"family-{fam}-cross-smallness",
                passed=worst_margin >= 0.0,
                margin=worst_margin,
                location=f"family {fam} at family {3 - fam} disk centers",
            )
        )
    subject = {
        "kind": "interleaved-pair",
        "weight": state_1.weight.family,
        "depth": state_1.depth,
    }
    return CheckReport(
        lemma="pair-interleaving", subject=subject, checks=tuple(checks), data=data
    )


# ---------------------------------------------------------------------------
# smoothness of the square root


def verify_smoothness(
    state: ConstructionState,
    *,
    pairs: int = 10_000,
    seed: int = 20260819,
    m_threshold: float = 50.0,
    band_slack: float = 10.0,
) -> CheckReport:
    """Sample the difference quotients of f = F^(1/2) = exp(W/2).

    On the near set E = {|w - z| <= theta(1 - |z|)^(-3)} the normalized
    quotient |f(z)|^(-2) |f(z) - f(w)|^2 / |z - w|^2 must stay below
    M exp[2 theta(1 - |z|)]; M is measured and reported.  Pairs whose
    separation falls under the floating point resolution switch to the
    diagonal limit |W'(z)/2|^2, which is the same quantity with the offset
    sent to zero.  The theta increment across each sampled pair stays
    below 1.  Off E, the quotient is compared under quadrature against the
    theta^6 reduction on a coarse near-boundary band; the reduction
    dominates within the stated slack.

    Pairs are drawn from the depth range where the near set is genuinely
    small: the increment of theta across a radius theta^(-3) step is about
    lam_prime * exp(x - 2 lambda), so sampling starts at the first knot
    past which that scale stays below 0.2.  Shallower annuli are covered
    by the off-band comparison; there the near-set radius still straddles
    the weight's own variation scale and the split says nothing.
    """
    if state.depth == 0:
        raise DomainError("state has no levels to verify")
    rng = np.random.default_rng(seed)
    s_deep = 0.55 * state.levels[-1].delta
    knots = state.minorant.xs
    q_vals = state.minorant.q_values
    slopes = np.diff(q_vals) / np.diff(knots)
    lam_k = q_vals[:-1] ** 2
    inc_scale = 2.0 * q_vals[:-1] * np.maximum(slopes, 0.0) * np.exp(
        np.minimum(knots[:-1] - 2.0 * lam_k, 50.0)
    )
    ok = inc_scale <= 0.2
    bad = np.nonzero(~ok)[0]
    x_floor = math.log(2.0) if bad.size == 0 else float(knots[bad[-1] + 1])
    if not x_floor < -math.log(s_deep) - 1.0:
        raise DomainError(
            "no depth window where the near-set radius sits below the "
            "weight's variation scale; deepen the construction"
        )
    x_samples = rng.uniform(x_floor, -math.log(s_deep), pairs)
    s_z = np.exp(-x_samples)
    ang = rng.uniform(0.0, _TWO_PI, pairs)
    z = (1.0 - s_z) * np.exp(1j * ang)
    lam_z = np.asarray(state.minorant.lambda_at(x_samples), dtype=float)
    theta_z = np.exp(np.minimum(lam_z, 700.0))
    r_e = np.exp(-3.0 * np.minimum(lam_z, 236.0))
    # stay inside E and inside the disk
    r_eff = np.minimum(r_e, 0.5 * s_z)
    u = rng.uniform(0.15, 1.0, pairs)
    phi = rng.uniform(0.0, _TWO_PI, pairs)
    w = z + u * r_eff * np.exp(1j * phi)
    sep = np.abs(w - z)
    resolvable = sep > np.maximum(1e-13, 8.0 * np.finfo(float).eps * np.abs(z))

    w_z = _w_sum(state, z)
    quant = np.empty(pairs)
    d_theta = np.zeros(pairs)
    if resolvable.any():
        w_w = _w_sum(state, w[resolvable])
        d = 0.5 * (w_w - w_z[resolvable])
        quant[resolvable] = 2.0 * (
            _log_abs_expm1(d) - np.log(sep[resolvable])
        )
        s_w = 1.0 - np.abs(w[resolvable])
        lam_w = np.asarray(state.minorant.lambda_at(-np.log(s_w)), dtype=float)
        d_theta[resolvable] = np.abs(
            np.exp(np.minimum(lam_w, 700.0)) - theta_z[resolvable]
        )
    frozen = ~resolvable
    if frozen.any():
        w_prime = _w_sum(state, z[frozen], derivative=True)
        with np.errstate(divide="ignore"):
            quant[frozen] = 2.0 * (np.log(np.abs(w_prime)) - math.log(2.0))
    log_m = float((quant - 2.0 * theta_z).max())
    checks = [
        PropertyCheck(
            name="near-quotient-bound",
            passed=bool(np.isfinite(quant).all()) and log_m <= m_threshold,
            margin=m_threshold - log_m,
            location=f"{pairs} sampled near pairs",
        ),
        PropertyCheck(
            name="theta-increment",
            passed=bool((d_theta < 1.0).all()),
            margin=1.0 - float(d_theta.max()),
            location="theta across sampled pairs",
        ),
        PropertyCheck(
            name="diagonal-excluded",
            passed=not resolvable.any()
            or float(sep[resolvable].min()) > 0.0,
            margin=float(sep[resolvable].min()) if resolvable.any() else math.inf,
            location="resolvable pair separations",
        ),
    ]

    # off-E comparison on the first band outside the near set, where the
    # reduction is doing actual work
    s_grid = np.geomspace(0.04, 0.35, 10)
    ang_grid = (np.arange(24) + 0.5) * (_TWO_PI / 24)
    zg = ((1.0 - s_grid)[:, None] * np.exp(1j * ang_grid)[None, :]).ravel()
    sg = np.repeat(s_grid, ang_grid.size)
    lam_g = np.asarray(state.minorant.lambda_at(-np.log(sg)), dtype=float)
    theta_g = np.exp(lam_g)
    r_eg = theta_g ** -3.0
    wz_g = _w_sum(state, zg)
    direct_parts = []
    reduced_parts = []
    for fac in (1.05, 1.2, 1.35):
        for aoff in (np.arange(8) + 0.5) * (_TWO_PI / 8):
            wg = zg + fac * r_eg * np.exp(1j * aoff)
            inside = np.abs(wg) < 1.0 - 1e-9
            if not inside.any():
                continue
            dw = 0.5 * (_w_sum(state, wg[inside]) - wz_g[inside])
            gap = np.log(fac * r_eg[inside])
            direct_parts.append(2.0 * (_log_abs_expm1(dw) - gap) - 2.0 * theta_g[inside])
            reduced_parts.append(
                math.log(2.0)
                + _log1pexp(2.0 * dw.real)
                + 6.0 * lam_g[inside]
                - 2.0 * theta_g[inside]
            )
    direct_total = float(logsumexp(np.concatenate(direct_parts)))
    reduced_total = float(logsumexp(np.concatenate(reduced_parts)))
    checks.append(
        PropertyCheck(
            name="off-band-reduction-dominates",
            passed=direct_total <= reduced_total + math.log(band_slack),
            margin=reduced_total + math.log(band_slack) - direct_total,
            location="first band outside the near set",
        )
    )
    data = {
        "log_m_measured": log_m,
        "pairs": pairs,
        "resolvable_pairs": int(resolvable.sum()),
        "derivative_pairs": int(frozen.sum()),
        "seed": seed,
        "majorant": "theta-minorant",
        "off_band_direct": direct_total,
        "off_band_reduced": reduced_total,
        "x_floor": x_floor,
    }
    subject = {
        "kind": "construction",
        "depth": state.depth,
        "x": [lev.x_n for lev in state.levels],
        "weight": state.weight.family,
    }
    return CheckReport(
        lemma="smoothness-split", subject=subject, checks=tuple(checks), data=data
    )


# ---------------------------------------------------------------------------
# serialization


def state_to_json_dict(state: ConstructionState) -> dict:
    return {
        "format": "construction-state-v1",
        "config": {
            "weight": _weight_to_config(state.weight),
            "kappa": state.kappa,
            "x_max": state.x_max,
            "knot_spacing": state.knot_spacing,
        },
        "levels": [lev.to_json_dict() for lev in state.levels],
    }


def state_hash(state: ConstructionState) -> str:
    """sha256 of the canonical JSON encoding; identical rebuilds hash equal."""
    blob = json.dumps(state_to_json_dict(state), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def dump_state(state: ConstructionState, path: str) -> None:
    text = json.dumps(state_to_json_dict(state), sort_keys=True, indent=1)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
        fh.write("\n")


def load_state(source: dict | str, *, verify: bool = False) -> ConstructionState:
    """Rebuild a state from its JSON dict or file path.

    The weight and minorant are re-derived from the stored config, the
    block of every level from its touch point; stored slopes must agree
    with the re-derived minorant to within rounding, otherwise the dump
    does not belong to this code path.  verify=True re-solves the mass
    equations and checks the stored gammas.
    """
    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        doc = source
    if doc.get("format") != "construction-state-v1":
        raise DomainError(f"unrecognized state format {doc.get('format')!r}")
    cfg = doc["config"]
    weight = weight_from_config(cfg["weight"])
    state = initialize_construction(
        weight,
        kappa=cfg["kappa"],
        x_max=cfg["x_max"],
        knot_spacing=cfg["knot_spacing"],
    )
    for ld in doc["levels"]:
        block = BuildingBlock.from_touch(state.minorant, float(ld["x"]))
        for key, stored in (("lam", ld["lam"]), ("lam_prime", ld["lam_prime"])):
            got = getattr(block, key)
            if abs(got - stored) > 1e-9 * max(1.0, abs(stored)):
                raise DomainError(
                    f"stored {key} = {stored} disagrees with the re-derived "
                    f"minorant value {got} at x = {ld['x']}"
                )
        rec = LevelRecord(
            n=int(ld["n"]),
            block=block,
            count=int(ld["count"]),
            angle_offset=float(ld["angle_offset"]),
            gammas=np.asarray(ld["gammas"], dtype=float),
            clamped=tuple((int(k), str(side)) for k, side in ld["clamped"]),
            eta=float(ld["eta"]),
            x_bound=float(ld["x_bound"]),
            binding=str(ld["binding"]),
            log_one_minus_tau=float(ld["log_one_minus_tau"]),
            c_increment=float(ld["c_increment"]),
            min_cross_gap=float(ld["min_cross_gap"]),
            residual33=float(ld["residual33"]),
        )
        state = replace(state, levels=state.levels + (rec,))
    if verify:
        for lev in state.levels:
            h, theta, log_w = _gamma_quadrature(lev.block, state.minorant)
            targets = _gamma_targets(
                state.truncated(lev.n - 1), lev.n, lev.zetas, lev.count
            )
            solved = _mass33_log(lev.gammas, h, theta, log_w)
            mask = np.ones(lev.count, dtype=bool)
            for k, _ in lev.clamped:
                mask[k] = False
            if mask.any():
                worst = float(np.abs((solved - targets)[mask]).max())
                if worst > 1e-5:
                    raise CertificationError(
                        f"stored gammas miss their mass targets by {worst:.2e} "
                        f"at level {lev.n}"
                    )
    return state


def write_radial_profile_csv(
    state: ConstructionState,
    path: str,
    *,
    angles: Sequence[float] = (0.0,),
    points: int = 360,
) -> None:
    """Radial profiles of log |F| as CSV rows (1 - |z|, angle, log |F|)."""
    if state.depth == 0:
        raise DomainError("state has no levels to profile")
    s_min = 0.55 * state.levels[-1].delta
    s_grid = np.geomspace(0.5, s_min, points)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("one_minus_abs,angle,log_abs_f\n")
        for a in angles:
            zs = (1.0 - s_grid) * np.exp(1j * float(a))
            vals = _w_sum(state, zs).real
            for s, v in zip(s_grid, vals):
                fh.write(f"{s!r},{float(a)!r},{float(v)!r}\n")
