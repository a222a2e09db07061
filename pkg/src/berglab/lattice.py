"""Boundary lattices of Blaschke zeros and certified interpolation.

A level places N_n nearly equally many nodes on the circle of radius r_n,
with N_n <= kappa / (1 - r_n) < N_n + 1, and picks one sample point inside
the disk of radius (1 - r_n)^2 around each node.  The finite Blaschke
product over the sample points stays within a narrow band of e^{-kappa}
away from the zero circle, its node derivatives grow like N_n, and the
closed-form comparator

    A_n(z) = (z^N - r_n^N) / (1 - r_n^N z^N)

coincides with the product when every sample point sits at its node.

Verifiers in this module measure those bands on explicit grids, run the
residue identity that reconstructs f(z) from lattice samples through a
contour integral, and convert summability of |f|^p over the lattice into
a pointwise growth envelope.  Products over several levels are always the
finite truncations at the levels supplied; reports say how many levels
entered.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .logdomain import LogComplex, LogReal, logsumexp, wrap_phase
from .reporting import CheckReport, PropertyCheck

_TWO_PI = 2.0 * math.pi

# Search net for the minimizer placement rule: 4 radii x 8 angles inside
# the unit disk, scaled by the cell radius (1 - r_n)^2 around each node.
_NET_RADII = (0.25, 0.5, 0.75, 0.97)
_NET_ANGLES = tuple(_TWO_PI * j / 8.0 for j in range(8))
_CELL_NET = np.array(
    [rho * complex(math.cos(a), math.sin(a)) for rho in _NET_RADII for a in _NET_ANGLES],
    dtype=complex,
)


def pseudo_hyperbolic(z: complex, w: complex) -> float:
    """Pseudo-hyperbolic distance |z - w| / |1 - z conj(w)| for z, w in the disk."""
    z = complex(z)
    w = complex(w)
    if abs(z) >= 1.0 or abs(w) >= 1.0:
        raise DomainError(
            f"pseudo_hyperbolic needs both points inside the open disk, got |z| = {abs(z)}, |w| = {abs(w)}"
        )
    return abs(z - w) / abs(1.0 - z * w.conjugate())


@dataclass(frozen=True)
class LatticeLevel:
    """One circle of Blaschke nodes and the sample points chosen near them.

    Invariants checked at construction: N_n <= kappa / (1 - r_n) < N_n + 1,
    the nodes are r_n e^{2 pi i k / N_n} in index order, and every sample
    point lies strictly within (1 - r_n)^2 of its node.
    """

    n: int
    kappa: float
    r_n: float
    N_n: int
    nodes: np.ndarray
    sample_points: np.ndarray
    rule: str = "centers"

    def __post_init__(self) -> None:
        if self.n < 1:
            raise DomainError(f"level index must be >= 1, got {self.n}")
        if not 0.0 < self.kappa < 1.0:
            raise DomainError(f"kappa must lie in (0, 1), got {self.kappa}")
        if not 0.0 < self.r_n < 1.0:
            raise DomainError(f"r_n must lie in (0, 1), got {self.r_n}")
        ratio = self.kappa / (1.0 - self.r_n)
        if not (self.N_n <= ratio < self.N_n + 1):
            raise DomainError(
                f"node count {self.N_n} violates N <= kappa/(1-r) < N+1 (ratio {ratio})"
            )
        nodes = np.asarray(self.nodes, dtype=complex)
        samples = np.asarray(self.sample_points, dtype=complex)
        if nodes.shape != (self.N_n,) or samples.shape != (self.N_n,):
            raise DomainError(
                f"expected {self.N_n} nodes and sample points, got shapes {nodes.shape} and {samples.shape}"
            )
        expected = self.r_n * np.exp(2j * math.pi * np.arange(self.N_n) / self.N_n)
        if np.max(np.abs(nodes - expected)) > 1e-14:
            raise DomainError("nodes are not the equally spaced points r_n e^{2 pi i k / N_n}")
        cell = (1.0 - self.r_n) ** 2
        off = np.abs(samples - nodes)
        if np.any(off >= cell):
            k = int(np.argmax(off - cell))
            raise DomainError(
                f"sample point {k} sits {off[k]} from its node, outside the open cell of radius {cell}"
            )
        if np.any(np.abs(samples) >= 1.0):
            raise DomainError("sample points must stay inside the open disk")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "sample_points", samples)

    @property
    def delta_n(self) -> float:
        return 1.0 - self.r_n

    def summary_dict(self) -> dict:
        return {
            "N_n": self.N_n,
            "kappa": self.kappa,
            "n": self.n,
            "r_n": self.r_n,
            "rule": self.rule,
        }

    def to_json_dict(self) -> dict:
        d = self.summary_dict()
        d["nodes"] = [[float(z.real), float(z.imag)] for z in self.nodes]
        d["sample_points"] = [[float(z.real), float(z.imag)] for z in self.sample_points]
        return d


@dataclass(frozen=True)
class SubsetMask:
    """A subset of a level's sample points, kept as sorted unique indices."""

    level: LatticeLevel
    selected: tuple[int, ...]

    def __post_init__(self) -> None:
        idx = tuple(int(j) for j in self.selected)
        if any(j < 0 or j >= self.level.N_n for j in idx):
            raise DomainError(f"subset indices must lie in [0, {self.level.N_n})")
        if len(set(idx)) != len(idx):
            raise DomainError("subset indices must be distinct")
        object.__setattr__(self, "selected", tuple(sorted(idx)))

    @classmethod
    def full(cls, level: LatticeLevel) -> "SubsetMask":
        return cls(level, tuple(range(level.N_n)))

    @property
    def sigma(self) -> float:
        """Fraction of the level's points that were dropped."""
        return 1.0 - len(self.selected) / self.level.N_n

    @property
    def points(self) -> np.ndarray:
        return self.level.sample_points[list(self.selected)]


def build_level(
    kappa: float,
    r_n: float,
    rule: str = "centers",
    *,
    n: int = 1,
    seed: int | None = None,
    minimize: Callable[[complex], float] | None = None,
) -> LatticeLevel:
    """Place N_n = floor(kappa / (1 - r_n)) sample points around the circle r_n.

    rule "centers" takes the nodes themselves, "perturbed" draws one uniform
    point per cell from a seeded generator (bit-identical across runs), and
    "minimizer" picks, per cell, the point of a fixed 32-point net where the
    supplied score is smallest.
    """
    if not 0.0 < kappa < 1.0:
        raise DomainError(f"kappa must lie in (0, 1), got {kappa}")
    if not 0.8 <= r_n < 1.0:
        raise DomainError(f"level radius must satisfy 4/5 <= r_n < 1, got {r_n}")
    ratio = kappa / (1.0 - r_n)
    if ratio < 1.0:
        raise DomainError(
            f"kappa / (1 - r_n) = {ratio} < 1 leaves no room for a node; deepen r_n or raise kappa"
        )
    count = int(math.floor(ratio))
    nodes = r_n * np.exp(2j * math.pi * np.arange(count) / count)
    cell = (1.0 - r_n) ** 2

    if rule == "centers":
        samples = nodes.copy()
    elif rule == "perturbed":
        if seed is None:
            raise DomainError("rule 'perturbed' needs an explicit seed")
        rng = np.random.default_rng(seed)
        # sqrt(u) makes the draw uniform in area; the 1 - 1e-12 margin keeps
        # the strict inequality |z - w| < (1 - r_n)^2 safe from rounding.
        radii = cell * np.sqrt(rng.uniform(0.0, 1.0, count)) * (1.0 - 1e-12)
        angles = rng.uniform(0.0, _TWO_PI, count)
        samples = nodes + radii * np.exp(1j * angles)
    elif rule == "minimizer":
        if minimize is None:
            raise DomainError("rule 'minimizer' needs a score callable")
        samples = np.empty(count, dtype=complex)
        for k in range(count):
            candidates = nodes[k] + cell * _CELL_NET
            scores = [float(minimize(complex(c))) for c in candidates]
            samples[k] = candidates[int(np.argmin(scores))]
    else:
        raise DomainError(f"unknown placement rule {rule!r}")

    return LatticeLevel(
        n=n, kappa=kappa, r_n=r_n, N_n=count, nodes=nodes, sample_points=samples, rule=rule
    )


def _check_points(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=complex).reshape(-1)
    if pts.size and np.max(np.abs(pts)) >= 1.0:
        raise DomainError("Blaschke zeros must lie strictly inside the unit disk")
    return pts


def blaschke_eval(points: Sequence[complex] | np.ndarray, z: complex) -> LogComplex:
    """Finite Blaschke product prod (z - a_k) / (1 - conj(a_k) z) in log form.

    z may sit anywhere on the closed disk; hitting a zero returns the log
    representation of 0.  An empty zero set gives the empty product 1.
    """
    pts = _check_points(points)
    z = complex(z)
    if abs(z) > 1.0 + 1e-12:
        raise DomainError(f"evaluation point must lie on the closed disk, got |z| = {abs(z)}")
    if pts.size == 0:
        return LogComplex(0.0, 0.0)
    num = z - pts
    if np.any(num == 0):
        return LogComplex.zero()
    den = 1.0 - np.conj(pts) * z
    log_mag = float(np.sum(np.log(np.abs(num))) - np.sum(np.log(np.abs(den))))
    phase = wrap_phase(float(np.sum(np.angle(num)) - np.sum(np.angle(den))))
    return LogComplex(log_mag, phase)


def _blaschke_log_abs_grid(points: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """log |B(z)| over a grid of evaluation points, chunked to bound memory."""
    pts = _check_points(points)
    zs = np.asarray(zs, dtype=complex).reshape(-1)
    if pts.size == 0:
        return np.zeros(zs.shape)
    out = np.empty(zs.shape)
    chunk = max(1, 2_000_000 // pts.size)
    for lo in range(0, zs.size, chunk):
        zc = zs[lo : lo + chunk, None]
        with np.errstate(divide="ignore"):
            term = np.log(np.abs(zc - pts[None, :])) - np.log(np.abs(1.0 - np.conj(pts)[None, :] * zc))
        out[lo : lo + chunk] = np.sum(term, axis=1)
    return out


def node_derivative(points: Sequence[complex] | np.ndarray, j: int) -> LogReal:
    """|B'(a_j)| at the j-th zero: prod_{k != j} rho(a_j, a_k) / (1 - |a_j|^2)."""
    pts = _check_points(points)
    if not 0 <= j < pts.size:
        raise DomainError(f"zero index {j} outside [0, {pts.size})")
    a = pts[j]
    others = np.delete(pts, j)
    if np.any(others == a):
        raise DomainError("duplicate zeros make the node derivative vanish; zeros must be simple")
    s = 1.0 - abs(a)
    log_one_minus_sq = math.log(s) + math.log(2.0 - s)
    total = -log_one_minus_sq
    if others.size:
        total += float(
            np.sum(np.log(np.abs(a - others))) - np.sum(np.log(np.abs(1.0 - np.conj(others) * a)))
        )
    return LogReal.from_log(total, 1)


def node_derivative_signed(points: Sequence[complex] | np.ndarray, j: int) -> LogComplex:
    """B'(a_j) with its phase, for residue sums.

    Equals prod_{k != j} (a_j - a_k) / (1 - conj(a_k) a_j) divided by the
    positive factor 1 - |a_j|^2, so its magnitude matches node_derivative.
    """
    pts = _check_points(points)
    if not 0 <= j < pts.size:
        raise DomainError(f"zero index {j} outside [0, {pts.size})")
    a = pts[j]
    others = np.delete(pts, j)
    if np.any(others == a):
        raise DomainError("duplicate zeros make the node derivative vanish; zeros must be simple")
    s = 1.0 - abs(a)
    log_mag = -(math.log(s) + math.log(2.0 - s))
    phase = 0.0
    if others.size:
        num = a - others
        den = 1.0 - np.conj(others) * a
        log_mag += float(np.sum(np.log(np.abs(num))) - np.sum(np.log(np.abs(den))))
        phase = float(np.sum(np.angle(num)) - np.sum(np.angle(den)))
    return LogComplex(log_mag, wrap_phase(phase))


def _node_derivative_log_min(points: np.ndarray) -> tuple[float, int]:
    """min_j log |B'(a_j)| over all zeros, with the attaining index."""
    pts = np.asarray(points, dtype=complex).reshape(-1)
    diff = pts[:, None] - pts[None, :]
    den = 1.0 - np.conj(pts)[None, :] * pts[:, None]
    with np.errstate(divide="ignore"):
        log_rho = np.log(np.abs(diff)) - np.log(np.abs(den))
    np.fill_diagonal(log_rho, 0.0)
    s = 1.0 - np.abs(pts)
    row = np.sum(log_rho, axis=1) - (np.log(s) + np.log(2.0 - s))
    j = int(np.argmin(row))
    return float(row[j]), j


def _comparator_log_abs(r_n: float, count: int, zs: np.ndarray) -> np.ndarray:
    """log |A_n(z)| for the comparator A_n(z) = (z^N - r^N) / (1 - r^N z^N).

    z^N is assembled from N log|z| and a wrapped phase so deep levels do not
    overflow; underflow of |z|^N to zero is harmless because r^N dominates.
    """
    zs = np.asarray(zs, dtype=complex).reshape(-1)
    a = math.exp(count * math.log(r_n))
    with np.errstate(divide="ignore"):
        log_abs_z = np.log(np.abs(zs))
    mag = np.exp(count * log_abs_z)
    zN = mag * np.exp(1j * count * np.angle(zs))
    with np.errstate(divide="ignore"):
        return np.log(np.abs(zN - a)) - np.log(np.abs(1.0 - a * zN))


def verify_ring_blaschke(
    level: LatticeLevel, r: float, eps: float, *, angular: int | None = None
) -> CheckReport:
    """Check the derivative floor and the e^{-kappa} band on the circle |z| = r.

    node_derivative_floor reports the measured constant min_j |B'(z_j)| / N_n
    as its margin (any positive value passes; acceptance configs pin what a
    given setup must achieve).  ring_band and comparator_band require
    |log|.| + kappa| <= eps on an angular grid of at least 4 N_n points.
    The below_regime flag marks levels too shallow for the band width eps,
    where a failure carries no information.
    """
    if not 0.0 < r < 1.0:
        raise DomainError(f"ring radius must lie in (0, 1), got {r}")
    if eps <= 0.0:
        raise DomainError(f"band width must be positive, got {eps}")
    grid_n = max(4 * level.N_n, 256, 0 if angular is None else int(angular))
    zs = r * np.exp(2j * math.pi * np.arange(grid_n) / grid_n)

    min_log, j_min = _node_derivative_log_min(level.sample_points)
    emp_c = math.exp(min_log - math.log(level.N_n))
    floor = PropertyCheck(
        name="node_derivative_floor",
        passed=math.isfinite(min_log),
        margin=emp_c,
        location=f"node index {j_min}",
    )

    log_b = _blaschke_log_abs_grid(level.sample_points, zs)
    dev_b = np.abs(log_b + level.kappa)
    i_b = int(np.argmax(dev_b))
    band = PropertyCheck(
        name="ring_band",
        passed=bool(dev_b[i_b] <= eps),
        margin=float(eps - dev_b[i_b]),
        location=f"z = {complex(zs[i_b])!r} on |z| = {r}",
    )

    log_a = _comparator_log_abs(level.r_n, level.N_n, zs)
    dev_a = np.abs(log_a + level.kappa)
    i_a = int(np.argmax(dev_a))
    comparator = PropertyCheck(
        name="comparator_band",
        passed=bool(dev_a[i_a] <= eps),
        margin=float(eps - dev_a[i_a]),
        location=f"z = {complex(zs[i_a])!r} on |z| = {r}",
    )

    gap = float(np.max(np.abs(log_b - log_a)))
    below = 2.0 * level.delta_n * (1.0 + level.kappa) > eps or r >= 1.0 - 2.0 * level.delta_n
    return CheckReport(
        lemma="ring-blaschke",
        subject=level.summary_dict(),
        checks=(floor, band, comparator),
        data={
            "angular_points": grid_n,
            "comparator_gap": gap,
            "empirical_node_constant": emp_c,
            "ring_radius": r,
            "worst_band_deviation": float(dev_b[i_b]),
        },
        below_regime=below,
    )


def verify_subset_blaschke(
    mask: SubsetMask, r: float, eps: float, *, angular: int | None = None, radial: int = 8
) -> CheckReport:
    """Two-sided band for the product over a subset of a level's points.

    On |z| <= r the subset product B* must stay above the full band,
    log|B*(z)| + kappa >= -eps, and may exceed it by at most the dropped
    fraction's contribution 3 kappa sigma / (1 - |z|) + eps.  A full mask
    has sigma = 0 and both sides collapse to the ring band.
    """
    if not 0.0 < r < 1.0:
        raise DomainError(f"scan radius must lie in (0, 1), got {r}")
    if eps <= 0.0:
        raise DomainError(f"band width must be positive, got {eps}")
    level = mask.level
    sigma = mask.sigma
    grid_n = max(4 * max(len(mask.selected), 1), 256, 0 if angular is None else int(angular))
    radii = np.linspace(r / radial, r, radial)
    angles = np.exp(2j * math.pi * np.arange(grid_n) / grid_n)

    worst_lower = math.inf
    worst_lower_at = ""
    worst_upper = math.inf
    worst_upper_at = ""
    for rho in radii:
        zs = rho * angles
        log_b = _blaschke_log_abs_grid(mask.points, zs)
        lower = log_b + level.kappa + eps
        i = int(np.argmin(lower))
        if lower[i] < worst_lower:
            worst_lower = float(lower[i])
            worst_lower_at = f"z = {complex(zs[i])!r}"
        allowance = 3.0 * level.kappa * sigma / (1.0 - rho) + eps
        upper = allowance - (log_b + level.kappa)
        i = int(np.argmin(upper))
        if upper[i] < worst_upper:
            worst_upper = float(upper[i])
            worst_upper_at = f"z = {complex(zs[i])!r}"

    below = 2.0 * level.delta_n * (1.0 + level.kappa) > eps or r >= 1.0 - 2.0 * level.delta_n
    subject = level.summary_dict()
    subject["selected"] = len(mask.selected)
    subject["sigma"] = sigma
    return CheckReport(
        lemma="subset-blaschke",
        subject=subject,
        checks=(
            PropertyCheck(
                name="band_lower",
                passed=worst_lower >= 0.0,
                margin=worst_lower,
                location=worst_lower_at,
            ),
            PropertyCheck(
                name="band_upper",
                passed=worst_upper >= 0.0,
                margin=worst_upper,
                location=worst_upper_at,
            ),
        ),
        data={
            "angular_points": grid_n,
            "radial_points": radial,
            "scan_radius": r,
        },
        below_regime=below,
    )


def _product_eval(masks: Sequence[SubsetMask], z: complex) -> LogComplex:
    out = LogComplex(0.0, 0.0)
    for m in masks:
        out = out * blaschke_eval(m.points, z)
    return out


def interpolation_identity(
    masks: Sequence[SubsetMask],
    f: Callable[[complex], complex],
    z: complex,
    r: float,
    *,
    oversample: int = 8,
    tol: float = 1e-8,
) -> CheckReport:
    """Residue identity for f against the product B* over the given masks.

    Checks that -f(z)/B*(z) plus the residue sum over sample points inside
    |z| < r equals the trapezoid contour integral of f(zeta) / (B*(zeta)
    (z - zeta)) on |zeta| = r.  The contour uses oversample points per
    enclosed sample point (counting at least 8, so sparse configurations
    still resolve).  Periodic trapezoid sums converge spectrally here, so
    doubling oversample multiplies the quadrature error geometrically.
    """
    if not masks:
        raise DomainError("interpolation needs at least one subset of sample points")
    if not 0.0 < r < 1.0:
        raise DomainError(f"contour radius must lie in (0, 1), got {r}")
    z = complex(z)
    if abs(z) >= r:
        raise DomainError(f"evaluation point must satisfy |z| < {r}, got |z| = {abs(z)}")
    if oversample < 2:
        raise DomainError(f"oversample must be >= 2, got {oversample}")

    enclosed: list[tuple[int, int]] = []
    for mi, m in enumerate(masks):
        for jj, pt in enumerate(m.points):
            d = abs(abs(pt) - r)
            if d < 1e-9:
                raise DomainError(
                    f"sample point {complex(pt)!r} sits on the contour |zeta| = {r}; move the contour"
                )
            if abs(pt) < r:
                enclosed.append((mi, jj))
            if pt == z:
                raise DomainError("evaluation point coincides with a sample point")

    b_at_z = _product_eval(masks, z)
    lhs = -complex(f(z)) / b_at_z.to_complex()
    for mi, jj in enclosed:
        pt = complex(masks[mi].points[jj])
        deriv = node_derivative_signed(masks[mi].points, jj)
        for mo, other in enumerate(masks):
            if mo != mi:
                deriv = deriv * blaschke_eval(other.points, pt)
        lhs += complex(f(pt)) / (deriv.to_complex() * (z - pt))

    m_pts = oversample * max(len(enclosed), 8)
    total = 0j
    for k in range(m_pts):
        zeta = r * complex(math.cos(_TWO_PI * k / m_pts), math.sin(_TWO_PI * k / m_pts))
        b_val = _product_eval(masks, zeta).to_complex()
        total += complex(f(zeta)) * zeta / (b_val * (z - zeta))
    contour = total / m_pts

    residual = abs(lhs - contour)
    scale = max(abs(lhs), abs(contour), 1.0)
    rel = residual / scale
    check = PropertyCheck(
        name="interpolation_residual",
        passed=bool(rel <= tol),
        margin=float(tol - rel),
        location=f"z = {z!r}, contour |zeta| = {r} with {m_pts} points",
    )
    return CheckReport(
        lemma="interpolation-identity",
        subject={
            "contour_radius": r,
            "enclosed_points": len(enclosed),
            "levels": [m.level.n for m in masks],
            "z": [z.real, z.imag],
        },
        checks=(check,),
        data={
            "contour_points": m_pts,
            "lhs": [lhs.real, lhs.imag],
            "residual": float(residual),
            "relative_residual": float(rel),
        },
    )


def growth_bound_check(
    levels: Sequence[LatticeLevel],
    log_f_samples: Sequence[np.ndarray],
    p: float,
    f_eval: Callable[[complex], LogComplex],
    *,
    angular: int = 64,
) -> CheckReport:
    """Turn lattice summability of |f|^p into a measured pointwise envelope.

    log_f_samples[i][k] is log |f| at sample point k of levels[i] (log form,
    since deep-level values overflow floats).  The summability hypothesis
    sum_k |f(z_{n,k})|^p <= n^2 N_n must hold at every level; violating it is
    a usage error naming the level.  The verifier then keeps the points with
    log |f| <= (4/p) log n, checks the dropped fraction sigma_n <= 1/n^2, and
    scans a radial grid (including each level's surrounding annuli) for the
    measured constants in

        |f(z)| <= c exp(1 / (1 - |z|)),

    together with the normalized product's upper envelope, its lower bound on
    the rings |z| = 1 - 2(1 - r_n), and the node derivative growth against
    N_n e^{kappa n}.  Those four constants are measurements reported as data;
    the named checks only require them to be finite.
    """
    if p <= 0.0:
        raise DomainError(f"exponent p must be positive, got {p}")
    if len(levels) != len(log_f_samples):
        raise DomainError(
            f"got {len(levels)} levels but {len(log_f_samples)} sample arrays"
        )
    if not levels:
        raise DomainError("growth check needs at least one level")
    samples = []
    for lv, arr in zip(levels, log_f_samples):
        a = np.asarray(arr, dtype=float).reshape(-1)
        if a.shape != (lv.N_n,):
            raise DomainError(
                f"level n = {lv.n} has {lv.N_n} sample points but {a.size} log values"
            )
        samples.append(a)

    # Summability first: a violation is a precondition failure, not a finding.
    for lv, a in zip(levels, samples):
        lse = logsumexp(p * a)
        bound = math.log(lv.n * lv.n * lv.N_n)
        if lse > bound + 1e-12:
            raise DomainError(
                f"summability fails at level n = {lv.n}: "
                f"log sum |f|^p = {lse} exceeds log(n^2 N_n) = {bound}"
            )

    masks = []
    worst_sigma = -math.inf
    worst_sigma_at = ""
    for lv, a in zip(levels, samples):
        threshold = (4.0 / p) * math.log(lv.n) + 1e-12
        keep = tuple(int(k) for k in np.nonzero(a <= threshold)[0])
        mask = SubsetMask(lv, keep)
        masks.append(mask)
        slack = 1.0 / (lv.n * lv.n) - mask.sigma
        if -slack > worst_sigma:
            worst_sigma = -slack
            worst_sigma_at = f"level n = {lv.n}, sigma = {mask.sigma}"
    density = PropertyCheck(
        name="subset_density",
        passed=worst_sigma <= 0.0,
        margin=float(-worst_sigma),
        location=worst_sigma_at,
    )

    # Scan grid: bulk radii plus each level's ring and surrounding annuli.
    radii = {0.125, 0.25, 0.5}
    for lv in levels:
        d = lv.delta_n
        for rho in (1.0 - 2.0 * d, 1.0 - d, 1.0 - 0.5 * d):
            if 0.0 < rho < 1.0:
                radii.add(rho)
    angles = np.exp(2j * math.pi * (np.arange(angular) + 0.5) / angular)

    log_c_env = -math.inf
    env_at = ""
    for rho in sorted(radii):
        for w in angles:
            zz = complex(rho * w)
            val = f_eval(zz).log_magnitude - 1.0 / (1.0 - rho)
            if val > log_c_env:
                log_c_env = val
                env_at = f"z = {zz!r}"
    envelope = PropertyCheck(
        name="growth_envelope",
        passed=math.isfinite(log_c_env) or log_c_env == -math.inf,
        margin=math.inf if log_c_env < math.inf else -math.inf,
        location=env_at or "empty grid",
    )

    # Normalized product: log |B*(z)| = sum_n (log |B*_n(z)| - N_n log r_n).
    norm_shift = [-lv.N_n * math.log(lv.r_n) for lv in levels]

    def log_bstar(zs: np.ndarray) -> np.ndarray:
        acc = np.zeros(zs.shape)
        for m, shift in zip(masks, norm_shift):
            acc += _blaschke_log_abs_grid(m.points, zs) + shift
        return acc

    log_c1 = -math.inf
    c1_at = ""
    for rho in sorted(radii):
        zs = rho * angles
        vals = log_bstar(zs) - 1.0 / (5.0 * (1.0 - rho))
        i = int(np.argmax(vals))
        if vals[i] > log_c1:
            log_c1 = float(vals[i])
            c1_at = f"z = {complex(zs[i])!r}"
    product_upper = PropertyCheck(
        name="normalized_product_upper",
        passed=log_c1 < math.inf,
        margin=math.inf if log_c1 < math.inf else -math.inf,
        location=c1_at,
    )

    log_c2 = math.inf
    c2_at = ""
    for lv in levels:
        rho = 1.0 - 2.0 * lv.delta_n
        if not 0.0 < rho < 1.0:
            continue
        zs = rho * angles
        vals = log_bstar(zs) - lv.kappa * lv.n
        i = int(np.argmin(vals))
        if vals[i] < log_c2:
            log_c2 = float(vals[i])
            c2_at = f"level n = {lv.n}, z = {complex(zs[i])!r}"
    ring_lower = PropertyCheck(
        name="ring_lower_bound",
        passed=log_c2 > -math.inf,
        margin=math.inf if log_c2 > -math.inf else -math.inf,
        location=c2_at or "no ring inside the disk",
    )

    log_c3 = math.inf
    c3_at = ""
    for mi, (lv, m) in enumerate(zip(levels, masks)):
        own = m.points
        for jj in range(len(m.selected)):
            val = node_derivative(own, jj).log_magnitude + norm_shift[mi]
            pt = complex(own[jj])
            for mo, other in enumerate(masks):
                if mo != mi:
                    val += blaschke_eval(other.points, pt).log_magnitude + norm_shift[mo]
            val -= math.log(lv.N_n) + lv.kappa * lv.n
            if val < log_c3:
                log_c3 = val
                c3_at = f"level n = {lv.n}, kept index {m.selected[jj]}"
    node_lower = PropertyCheck(
        name="node_derivative_lower",
        passed=log_c3 > -math.inf,
        margin=math.inf if log_c3 > -math.inf else -math.inf,
        location=c3_at or "no kept points",
    )

    # a schedule that exactly doubles depth must not trip the gate through
    # rounding in 1 - r_n, hence the absolute slack
    xs = [-math.log(lv.delta_n) for lv in levels]
    below = len(levels) < 2 or any(xs[i + 1] < 2.0 * xs[i] - 1e-9 for i in range(len(xs) - 1))
    return CheckReport(
        lemma="lattice-growth",
        subject={
            "levels": [lv.summary_dict() for lv in levels],
            "p": p,
        },
        checks=(density, envelope, product_upper, ring_lower, node_lower),
        data={
            "angular_points": angular,
            "log_envelope_constant": log_c_env,
            "log_node_derivative_constant": log_c3,
            "log_product_upper_constant": log_c1,
            "log_ring_lower_constant": log_c2,
            "scan_radii": sorted(radii),
            "sigmas": [m.sigma for m in masks],
        },
        below_regime=below,
    )
