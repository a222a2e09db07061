"""Harmonic building blocks attached to touch points of a regularized weight.

A block at depth x_n is the harmonic function h = Re H of

    H(z) = exp(lam - x_n * lam') * (1 - z)^(-lam')        (principal branch)

where lam = lambda(x_n) and lam' is the right derivative of the convex
minorant there.  Along the ray toward z = 1 the exponent of H traces the
tangent line of lambda at x_n, so h peaks at r_n = 1 - e^(-x_n) with value
theta(1 - r_n) and decays on either side at the rate the convexity gap
dictates.

Everything here is evaluated through the boundary offset w = 1 - z.  The
block geometry lives on scales down to e^(-x_n)^2, far below the spacing of
representable floats near 1, so offsets are the only coordinates in which
those features exist at all; `block_eval_offset` and friends accept them
directly and `verify_*` builds its probe grids as offsets.  Magnitudes are
carried as logs throughout (values scale like exp(exp(x_n))), and every
comparison against the weight profile happens at the lambda scale, i.e.
between logs of values, never between the values themselves.

The asymptotic inequalities verified here hold for blocks that are deep
enough.  Shallow blocks are still evaluated and reported, but the report is
flagged `below_regime`; see `verify_majorants` for the quantitative gate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .convexreg import MinorantResult, regularized_theta
from .errors import DomainError, QuadratureError
from .logdomain import LogComplex, LogReal, logsumexp, wrap_phase
from .quadrature import gauss_legendre_cell
from .reporting import CheckReport, PropertyCheck
from .weights import RadialWeight

__all__ = [
    "BuildingBlock",
    "f_alpha",
    "block_eval",
    "block_eval_offset",
    "block_derivative",
    "block_derivative_offset",
    "majorant_grid",
    "verify_majorants",
    "verify_block_concentration",
    "verify_theta_regularity",
    "nearby_point_bounds",
    "derivative_ratio_bounds",
]

_REL_TOL = 1e-9

# Depth floors for the asymptotic regime.  x_n >= MIN_DEPTH_X keeps the
# geometric scales separated; lam >= MIN_DEPTH_LAM makes gamma_n = e^(-lam/10)
# and 2*lam^2*e^(-lam) both smaller than the verification tolerance, which is
# what the majorant inequality needs on the zero-curvature tangent segment of
# a piecewise linear minorant.
MIN_DEPTH_X = 8.0
MIN_DEPTH_LAM = 210.0


@dataclass(frozen=True)
class BuildingBlock:
    """One block: the touch data plus the derived geometry.

    gamma_n = e^(-lam/10) is the largest admissible bump factor; it underflows
    to an exact float zero for deep blocks, so code that needs log(gamma_n)
    derives it from lam instead of this field.  gamma_used is the factor an
    actual construction chose, anywhere in [0, gamma_n].
    """

    x_n: float
    lam: float
    lam_prime: float
    delta_n: float
    r_n: float
    gamma_n: float
    gamma_used: float

    def __post_init__(self) -> None:
        if not (self.x_n > 0.0 and math.isfinite(self.x_n)):
            raise DomainError(f"block depth must be positive and finite, got {self.x_n}")
        if not (self.lam > 0.0 and self.lam_prime > 0.0):
            raise DomainError("block needs lam > 0 and lam_prime > 0")
        if self.lam_prime > self.lam ** 1.5 * (1.0 + 1e-12):
            raise DomainError(
                f"slope {self.lam_prime} exceeds the budget lam^(3/2) = {self.lam**1.5}"
            )
        if not 0.0 < self.delta_n < 1.0:
            raise DomainError(f"delta_n must lie in (0,1), got {self.delta_n}")
        if self.r_n != 1.0 - self.delta_n:
            raise DomainError("r_n must equal 1 - delta_n exactly")
        if self.gamma_n != _gamma_cap(self.lam):
            raise DomainError("gamma_n must equal exp(-lam/10)")
        if not 0.0 <= self.gamma_used <= self.gamma_n:
            raise DomainError(
                f"gamma_used = {self.gamma_used} outside [0, {self.gamma_n}]"
            )

    @classmethod
    def create(
        cls, x_n: float, lam: float, lam_prime: float, gamma_used: float = 0.0
    ) -> "BuildingBlock":
        delta = math.exp(-float(x_n))
        return cls(
            x_n=float(x_n),
            lam=float(lam),
            lam_prime=float(lam_prime),
            delta_n=delta,
            r_n=1.0 - delta,
            gamma_n=_gamma_cap(float(lam)),
            gamma_used=float(gamma_used),
        )

    @classmethod
    def from_touch(
        cls, result: MinorantResult, x_n: float, gamma_used: float = 0.0
    ) -> "BuildingBlock":
        """Build the block at the touch point nearest x_n.

        The abscissa must match a touch point of `result` to within 1e-9
        relative; the minorant's own guarantees then supply the slope bounds
        eps0*lam <= lam' <= lam^(3/2).
        """
        if not result.touch_points:
            raise DomainError("minorant result carries no touch points")
        touches = np.asarray(result.touch_points)
        i = int(np.argmin(np.abs(touches - x_n)))
        nearest = float(touches[i])
        if abs(nearest - x_n) > 1e-9 * max(1.0, abs(x_n)):
            raise DomainError(
                f"x = {x_n} is not a touch point; nearest touch is {nearest}"
            )
        lam = result.lambda_at(nearest)
        lam_prime = result.lambda_prime_at(nearest)
        if lam_prime < result.epsilon0 * lam * (1.0 - 1e-9):
            raise DomainError(
                f"touch slope {lam_prime} below eps0*lam = {result.epsilon0 * lam}"
            )
        return cls.create(nearest, lam, lam_prime, gamma_used)

    def as_dict(self) -> dict:
        return {
            "x_n": self.x_n,
            "lam": self.lam,
            "lam_prime": self.lam_prime,
            "delta_n": self.delta_n,
            "r_n": self.r_n,
            "gamma_n": self.gamma_n,
            "gamma_used": self.gamma_used,
        }


def _gamma_cap(lam: float) -> float:
    return math.exp(-lam / 10.0)


def _log1p_gamma(lam: float) -> float:
    """log(1 + gamma_n) straight from lam; exact through the underflow."""
    return math.log1p(math.exp(-lam / 10.0))


def _in_regime(block: BuildingBlock, epsilon0: float | None = None) -> bool:
    ok = block.x_n >= MIN_DEPTH_X and block.lam >= MIN_DEPTH_LAM
    if epsilon0 is not None:
        # the far-field bound needs lam*(1 - eps0) to dominate 3*x_n
        ok = ok and block.lam * (1.0 - epsilon0) >= 3.6 * block.x_n
    return ok


# -- pointwise evaluation ----------------------------------------------------


def f_alpha(alpha: float, z: complex) -> LogComplex:
    """(1 - z)^(-alpha) on the principal branch, as a LogComplex.

    z = 1 is the singularity and is rejected.
    """
    w = 1.0 - complex(z)
    if w == 0:
        raise DomainError("f_alpha is singular at z = 1")
    return LogComplex.from_complex(w).pow_real(-float(alpha))


def block_eval_offset(block: BuildingBlock, w: complex) -> tuple[LogComplex, LogReal]:
    """Evaluate (H, h) at z = 1 - w given the boundary offset w directly.

    Offsets preserve the block geometry at scales below the float spacing
    near 1; callers working near the peak should construct w exactly rather
    than round-tripping through z.
    """
    w = complex(w)
    if w == 0:
        raise DomainError("block is singular at z = 1")
    # grouping x_n + log|w| keeps the exponent exact at the peak w = delta_n
    log_mag = block.lam - block.lam_prime * (block.x_n + math.log(abs(w)))
    phase = wrap_phase(-block.lam_prime * math.atan2(w.imag, w.real))
    big_h = LogComplex(log_mag, phase)
    return big_h, big_h.real_part()


def block_eval(block: BuildingBlock, z: complex) -> tuple[LogComplex, LogReal]:
    """Evaluate (H, h) at the point z itself."""
    return block_eval_offset(block, 1.0 - complex(z))


def block_derivative_offset(block: BuildingBlock, w: complex) -> LogComplex:
    """dH/dz at z = 1 - w: exp(lam - x_n lam') * lam' * (1-z)^(-lam'-1)."""
    w = complex(w)
    if w == 0:
        raise DomainError("block is singular at z = 1")
    lw = math.log(abs(w))
    log_mag = (
        block.lam
        - block.lam_prime * (block.x_n + lw)
        - lw
        + math.log(block.lam_prime)
    )
    phase = wrap_phase(-(block.lam_prime + 1.0) * math.atan2(w.imag, w.real))
    return LogComplex(log_mag, phase)


def block_derivative(block: BuildingBlock, z: complex) -> LogComplex:
    return block_derivative_offset(block, 1.0 - complex(z))


# -- probe grids and the majorant report -------------------------------------


def _gap_from_offsets(w: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(1 - |z|, |z|) for z = 1 - w, via 1-|z| = (1-|z|^2)/(1+|z|).

    The direct form 1 - |1-w| cancels catastrophically for |w| << 1; the
    quotient form is exact to relative rounding in w.
    """
    z_abs = np.abs(1.0 - w)
    num = 2.0 * w.real - (w.real * w.real + w.imag * w.imag)
    return num / (1.0 + z_abs), z_abs


def majorant_grid(
    block: BuildingBlock,
    result: MinorantResult,
    *,
    n_levels: int = 40,
    n_angles: int = 16,
    ring_angles: int = 16,
) -> np.ndarray:
    """Probe offsets w = 1 - z for the majorant checks.

    Depth levels sweep the computed window and cluster around x_n down to the
    e^(-x_n) scale; each level carries an angular ladder from the block's
    oscillation scale pi/lam' out to pi.  A ring just outside the excluded
    disk |z - r_n| < delta^2, the peak w = delta, the dip offset
    delta*e^(i pi/lam'), and the antipode z = -r_n are added explicitly.
    """
    x_lo, x_hi = result.domain
    t_min = max(x_lo, 0.25)
    if not t_min < x_hi:
        raise DomainError("minorant domain too small for a probe grid")
    delta = block.delta_n
    x_n = block.x_n

    levels = [np.linspace(t_min, x_hi, n_levels)]
    near = x_n + np.array(
        [-4, -3, -2, -1.5, -1, -0.75, -0.5, -0.35, -0.25, -0.15, -0.1, 0.1,
         0.15, 0.25, 0.35, 0.5, 0.75, 1, 1.5, 2, 3, 4],
        dtype=float,
    )
    fine = x_n + delta * np.array([-2, -1, -0.5, -0.25, 0.25, 0.5, 1, 2])
    levels.extend([near, fine])
    ts = np.concatenate(levels)
    ts = np.unique(ts[(ts >= t_min) & (ts <= x_hi)])

    base = min(math.pi / (2.0 * block.lam_prime), math.pi / 4.0)
    ladder = np.geomspace(base, math.pi, n_angles)
    psis = np.concatenate([[0.0], ladder, -ladder])

    s = np.exp(-ts)
    rho = 1.0 - s
    sin_half = np.sin(psis / 2.0)
    # w = 1 - rho*e^(i psi), assembled without the 1 - rho*cos(psi) cancellation
    re = s[:, None] + 2.0 * rho[:, None] * (sin_half * sin_half)[None, :]
    im = -rho[:, None] * np.sin(psis)[None, :]
    pts = [(re + 1j * im).ravel()]

    ring_psi = 2.0 * math.pi * (np.arange(ring_angles) + 0.5) / ring_angles
    pts.append(delta + 2.0 * delta * delta * np.exp(1j * ring_psi))
    pts.append(
        np.array(
            [
                delta,
                delta * np.exp(1j * math.pi / block.lam_prime),
                1.0 + block.r_n,
            ]
        )
    )
    return np.unique(np.concatenate(pts))


def verify_majorants(
    block: BuildingBlock,
    result: MinorantResult,
    grid: np.ndarray | None = None,
    *,
    min_depth_x: float = MIN_DEPTH_X,
    min_depth_lam: float = MIN_DEPTH_LAM,
    rel_tol: float = _REL_TOL,
) -> CheckReport:
    """Check the majorant inequalities of the block against theta.

    Checks, all at the lambda scale (logs of values):

    * bound_above: |h(z)| <= theta(1-|z|) on the whole grid, with equality
      allowed at the peak z = r_n.
    * majorant_off_disk: (1+gamma_n) h(z) <= theta - 2 (log theta)^2 outside
      the disk |z - r_n| < delta^2.  Points where the right side is not
      positive (2 lam^2 e^(-lam) >= 1, a band of shallow depths) are skipped
      and counted: the stated bound is false there for any positive h, and
      nothing is claimed.
    * lower_bound_beyond_c: the two-sided version |(1+gamma_n) h| <= theta -
      2 (log theta)^2 for all grid points at depth t >= t*, where t* is the
      shallowest depth beyond which every probe passes.  The radius
      c = 1 - e^(-t*) is reported as data["empirical_c"]; the check fails
      only if the deepest probes themselves fail.
    * peak_alignment: h(r_n) = theta(delta_n) to relative tolerance.

    Blocks with x_n < min_depth_x or lam < min_depth_lam are below the
    asymptotic regime: the report is flagged and failures there are expected
    rather than disqualifying.
    """
    if grid is None:
        grid = majorant_grid(block, result)
    w = np.asarray(grid, dtype=complex)
    x_lo, x_hi = result.domain

    s, _ = _gap_from_offsets(w)
    inside = s > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = -np.log(s)
    # the offset->depth round trip carries ~1e-9 relative noise at O(1)
    # offsets, so the window gets a matching cushion
    in_window = inside & (t >= x_lo - 1e-6) & (t <= x_hi + 1e-6)
    dropped = int(w.size - np.count_nonzero(in_window))
    w = w[in_window]
    t = t[in_window]
    if w.size == 0:
        raise DomainError("no grid offsets fall inside the disk and the domain")

    lam = block.lam
    lamp = block.lam_prime
    log_abs_w = np.log(np.abs(w))
    arg_w = np.arctan2(w.imag, w.real)
    log_mag = lam - lamp * (block.x_n + log_abs_w)
    cos_ph = np.cos(lamp * arg_w)
    with np.errstate(divide="ignore"):
        log_abs_h = log_mag + np.log(np.abs(cos_ph))
    sign_h = np.sign(cos_ph)

    lam_t = np.asarray(result.lambda_at(t), dtype=float)
    norm = np.maximum(np.abs(lam_t), 1.0)

    def _loc(i: int) -> str:
        return f"t = {t[i]:.6g}, arg(1-z) = {arg_w[i]:.3g}"

    checks: list[PropertyCheck] = []

    # (a) |h| <= theta everywhere
    margins_a = (lam_t - log_abs_h) / norm
    ia = int(np.argmin(margins_a))
    checks.append(
        PropertyCheck(
            "bound_above", bool(margins_a[ia] >= -rel_tol), float(margins_a[ia]), _loc(ia)
        )
    )

    # (b)/(c) machinery off the excluded disk
    off_disk = np.abs(block.delta_n - w) >= block.delta_n**2
    with np.errstate(over="ignore", under="ignore"):
        correction = 2.0 * lam_t * lam_t * np.exp(-lam_t)
    window_ok = correction < 1.0
    rhs_log = np.full_like(lam_t, -np.inf)
    rhs_log[window_ok] = lam_t[window_ok] + np.log1p(-correction[window_ok])
    skipped_mid = int(np.count_nonzero(off_disk & ~window_ok))
    lg1p = _log1p_gamma(lam)
    lhs_abs = lg1p + log_abs_h

    sel_b = off_disk & window_ok & (sign_h > 0)
    if np.any(sel_b):
        margins_b = (rhs_log[sel_b] - lhs_abs[sel_b]) / norm[sel_b]
        idx_b = np.flatnonzero(sel_b)
        ib = int(idx_b[np.argmin(margins_b)])
        checks.append(
            PropertyCheck(
                "majorant_off_disk",
                bool(margins_b.min() >= -rel_tol),
                float(margins_b.min()),
                _loc(ib),
            )
        )
    else:
        checks.append(
            PropertyCheck("majorant_off_disk", True, math.inf, "no positive h off the disk")
        )

    sel_c = off_disk & window_ok
    t_star = None
    empirical_c = None
    if np.any(sel_c):
        margins_c = (rhs_log[sel_c] - lhs_abs[sel_c]) / norm[sel_c]
        t_c = t[sel_c]
        idx_c = np.flatnonzero(sel_c)
        ok_c = margins_c >= -rel_tol
        if ok_c.all():
            t_star = float(t_c.min())
        else:
            t_fail = float(t_c[~ok_c].max())
            deeper = t_c > t_fail
            t_star = float(t_c[deeper].min()) if deeper.any() else None
        if t_star is None:
            worst = ~ok_c & (t_c == t_c[~ok_c].max())
            iw = int(idx_c[np.flatnonzero(worst)[0]])
            checks.append(
                PropertyCheck(
                    "lower_bound_beyond_c",
                    False,
                    float(margins_c[np.flatnonzero(worst)[0]]),
                    _loc(iw),
                )
            )
        else:
            empirical_c = 1.0 - math.exp(-t_star)
            beyond = t_c >= t_star
            mb = margins_c[beyond]
            iw = int(idx_c[np.flatnonzero(beyond)[np.argmin(mb)]])
            checks.append(
                PropertyCheck("lower_bound_beyond_c", True, float(mb.min()), _loc(iw))
            )
    else:
        checks.append(
            PropertyCheck("lower_bound_beyond_c", True, math.inf, "no points off the disk")
        )

    # (d) h(r_n) = theta(delta_n), probed through the exact offset
    _, h_peak = block_eval_offset(block, block.delta_n)
    lam_ref = regularized_theta(result, block.delta_n).log_magnitude
    dev = abs(h_peak.log_magnitude - lam_ref) / max(abs(lam_ref), 1.0)
    if h_peak.sign <= 0:
        checks.append(
            PropertyCheck("peak_alignment", False, -math.inf, "h(r_n) is not positive")
        )
    else:
        checks.append(
            PropertyCheck(
                "peak_alignment", bool(dev <= rel_tol), float(-dev), f"t = {block.x_n:.6g}"
            )
        )

    return CheckReport(
        lemma="block-majorants",
        subject=block.as_dict(),
        checks=tuple(checks),
        data={
            "empirical_c": empirical_c,
            "t_star": t_star,
            "skipped_mid_window": skipped_mid,
            "excluded_disk_points": int(np.count_nonzero(~off_disk)),
            "grid_points": int(w.size),
            "dropped_out_of_window": dropped,
        },
        below_regime=not (block.x_n >= min_depth_x and block.lam >= min_depth_lam),
    )


# -- concentration around the peak -------------------------------------------


def _signed_diff_exp(log_pos: np.ndarray, sign_pos: np.ndarray, log_neg: np.ndarray) -> np.ndarray:
    """sign_pos*exp(log_pos) - exp(log_neg) as floats, saturating to +-inf.

    Never produces NaN: the competing exponentials are combined under a max
    shift, so inf - inf cannot arise.
    """
    a, sa, b = np.broadcast_arrays(
        np.asarray(log_pos, dtype=float),
        np.asarray(sign_pos, dtype=float),
        np.asarray(log_neg, dtype=float),
    )
    out = np.empty(a.shape)

    with np.errstate(over="ignore", under="ignore", divide="ignore", invalid="ignore"):
        neg_total = np.logaddexp(a, b)  # |a-side| + |b-side| when the signs agree
        neg_case = sa <= 0
        out[neg_case] = -np.exp(neg_total[neg_case])

        pos_case = ~neg_case
        m = np.maximum(a, b)
        degenerate = m == -np.inf
        d = np.where(degenerate, 0.0, np.exp(a - m) - np.exp(b - m))
        mag = np.where(d == 0.0, -np.inf, m + np.log(np.abs(d)))
        vals = np.sign(d) * np.exp(mag)
        out[pos_case] = vals[pos_case]

    # a dominating -exp(log_neg) with log_neg = +inf must win regardless of sign
    out[np.isposinf(b)] = -np.inf
    return out


def verify_block_concentration(
    block: BuildingBlock,
    weight: RadialWeight,
    result: MinorantResult,
    *,
    angular: int = 64,
    radial_cells: int = 24,
    far_radii: int = 8,
    far_angles: int = 9,
    rel_tol: float = _REL_TOL,
) -> CheckReport:
    """Far-field smallness, the deep dip, and the unit mass near the peak.

    * far_field_smallness: |h| < delta^3 wherever |z - 1| >= delta *
      e^(2/eps0 - 1).  Vacuous (and noted) when that radius exceeds the disk.
    * deep_dip_witness / witness_radius_window: at the offset
      w = delta * e^(i pi / lam') the block equals -theta(delta), and the
      witness sits in the shell delta/2 < 1 - |z| < delta.
    * mass_lower_bound: the integral of exp[(1+gamma_n) h - Theta(1-|z|)]
      over |z - r_n| < delta^2 against dm = dA/pi is at least 1.  The
      exponent is assembled in the log domain (gamma_n itself may underflow)
      and the check reports log of the integral as its margin; an integrand
      that vanishes on every node raises QuadratureError, since that means
      the mesh missed the peak rather than that the mass is small.
    """
    eps0 = weight.epsilon0
    delta = block.delta_n
    lam = block.lam
    lamp = block.lam_prime
    checks: list[PropertyCheck] = []
    data: dict = {"epsilon0": eps0}

    # (a) far field
    r_far = delta * math.exp(2.0 / eps0 - 1.0)
    data["far_field_radius"] = r_far
    if r_far >= 2.0:
        checks.append(
            PropertyCheck(
                "far_field_smallness",
                True,
                math.inf,
                f"threshold radius {r_far:.3g} contains no disk point",
            )
        )
    else:
        radii = np.geomspace(r_far, 2.0, far_radii)
        worst = math.inf
        worst_loc = ""
        norm = max(3.0 * block.x_n, 1.0)
        for radius in radii:
            psi_max = math.acos(min(radius / 2.0, 1.0))
            psis = np.linspace(-psi_max, psi_max, far_angles)
            with np.errstate(divide="ignore"):
                log_abs_h = (
                    lam
                    - lamp * (block.x_n + math.log(radius))
                    + np.log(np.abs(np.cos(lamp * psis)))
                )
            margins = (-3.0 * block.x_n - log_abs_h) / norm
            i = int(np.argmin(margins))
            if margins[i] < worst:
                worst = float(margins[i])
                worst_loc = f"|1-z| = {radius:.6g}, arg(1-z) = {psis[i]:.3g}"
        checks.append(
            PropertyCheck("far_field_smallness", bool(worst >= -rel_tol), worst, worst_loc)
        )

    # (b) the dip witness
    dip = delta * complex(math.cos(math.pi / lamp), math.sin(math.pi / lamp))
    _, h_dip = block_eval_offset(block, dip)
    lam_ref = regularized_theta(result, delta).log_magnitude
    if h_dip.sign >= 0:
        checks.append(
            PropertyCheck("deep_dip_witness", False, -math.inf, "h at the dip is not negative")
        )
    else:
        dev = abs(h_dip.log_magnitude - lam_ref) / max(abs(lam_ref), 1.0)
        checks.append(
            PropertyCheck(
                "deep_dip_witness",
                bool(dev <= rel_tol),
                float(-dev),
                f"arg(1-z) = {math.pi / lamp:.3g}",
            )
        )
    s_dip, _ = _gap_from_offsets(np.array([dip]))
    gap = float(s_dip[0])
    window_margin = min(gap - delta / 2.0, delta - gap) / delta
    checks.append(
        PropertyCheck(
            "witness_radius_window",
            bool(window_margin > 0.0),
            float(window_margin),
            f"1-|z| = {gap:.6g} vs delta = {delta:.6g}",
        )
    )

    # (c) unit mass on the excluded disk
    bounds = np.concatenate([np.geomspace(1.0, 1e-6, radial_cells + 1), [0.0]])
    sig_parts = []
    wq_parts = []
    for i in range(bounds.size - 1):
        nodes, wts = gauss_legendre_cell(float(bounds[i + 1]), float(bounds[i]), 4)
        sig_parts.append(nodes)
        wq_parts.append(wts)
    sigma = np.concatenate(sig_parts)
    w_sigma = np.concatenate(wq_parts)
    psi = 2.0 * math.pi * (np.arange(angular) + 0.5) / angular

    u = delta * sigma[:, None] * np.exp(1j * psi)[None, :]  # (delta^2 sigma e^(i psi)) / delta
    one_minus_u = 1.0 - u
    log_w_group = (block.x_n + math.log(delta)) + np.log(np.abs(one_minus_u))
    log_mag = lam - lamp * log_w_group
    cos_ph = np.cos(lamp * np.angle(one_minus_u))
    with np.errstate(divide="ignore"):
        log_abs_h = log_mag + np.log(np.abs(cos_ph))
    sign_h = np.sign(cos_ph)
    log_h_bumped = np.logaddexp(log_abs_h, log_abs_h - lam / 10.0)  # log((1+gamma)|h|)

    w_off = delta * one_minus_u
    s_gap, _ = _gap_from_offsets(w_off)
    if np.any(s_gap <= 0.0):
        raise QuadratureError("concentration mesh left the disk", where="block mass")
    t_mesh = -np.log(s_gap)
    with np.errstate(over="ignore"):
        big_lam = np.asarray(weight.lambda_at(t_mesh), dtype=float)

    exponent = _signed_diff_exp(log_h_bumped, sign_h, big_lam)
    log_meas = (
        np.log(w_sigma)[:, None]
        + np.log(sigma)[:, None]
        + math.log(2.0 / angular)
        + 4.0 * math.log(delta)
    )
    terms = exponent + np.broadcast_to(log_meas, exponent.shape)
    if np.isnan(terms).any():
        raise QuadratureError("NaN in concentration integrand", where="block mass")
    total = logsumexp(terms.ravel())
    if total == -math.inf:
        raise QuadratureError(
            "integrand vanished on every node; refine the mesh or check that "
            "the block sits at a touch point of this weight",
            where="block mass",
        )
    checks.append(
        PropertyCheck(
            "mass_lower_bound",
            bool(total >= -rel_tol),
            float(total),
            f"log mass over |z - r_n| < {delta * delta:.3g}",
        )
    )
    data["log_mass"] = float(total)

    return CheckReport(
        lemma="block-concentration",
        subject=block.as_dict(),
        checks=tuple(checks),
        data=data,
        below_regime=not _in_regime(block, eps0),
    )


# -- regularity of theta itself ----------------------------------------------


def verify_theta_regularity(result: MinorantResult, s_grid: np.ndarray) -> CheckReport:
    """theta(s - theta(s)^(-2)) < theta(s) + 1 across the sample grid.

    Points where the step s - theta^(-2) is not positive are skipped with a
    note; points where the step underflows float spacing hold trivially and
    are counted separately.  Every evaluated point has theta in float range
    (a representable nonzero step forces lam <= (x + 53 log 2)/2), so the
    comparison runs in plain floats with an absolute margin.
    """
    x_lo, x_hi = result.domain
    evaluated = 0
    trivial = 0
    skipped_nonpositive = 0
    skipped_domain = 0
    worst = math.inf
    worst_loc = "no points evaluated"
    n_failed = 0

    for s in np.asarray(s_grid, dtype=float):
        s = float(s)
        if not 0.0 < s < 1.0:
            raise DomainError(f"s_grid entries must lie in (0,1), got {s}")
        x = -math.log(s)
        if not x_lo <= x <= x_hi:
            skipped_domain += 1
            continue
        lam_s = float(result.lambda_at(x))
        try:
            step = math.exp(-2.0 * lam_s)
        except OverflowError:
            step = 0.0
        s2 = s - step
        if s2 <= 0.0:
            skipped_nonpositive += 1
            continue
        if s2 == s:
            trivial += 1
            continue
        x2 = -math.log(s2)
        if x2 > x_hi:
            skipped_domain += 1
            continue
        lam_s2 = float(result.lambda_at(x2))
        theta = math.exp(lam_s)
        theta2 = math.exp(lam_s2)
        margin = theta + 1.0 - theta2
        evaluated += 1
        if margin <= 0.0:
            n_failed += 1
        if margin < worst:
            worst = margin
            worst_loc = f"s = {s:.6g}"

    passed = n_failed == 0
    check = PropertyCheck(
        "theta_stability",
        passed,
        worst if evaluated else math.inf,
        worst_loc,
    )
    return CheckReport(
        lemma="theta-regularity",
        subject={"kind": "regularized-theta", "domain": [x_lo, x_hi], "epsilon0": result.epsilon0},
        checks=(check,),
        data={
            "evaluated": evaluated,
            "trivial_underflow": trivial,
            "skipped_nonpositive_step": skipped_nonpositive,
            "skipped_out_of_domain": skipped_domain,
        },
    )


# -- estimates for nearby point pairs ----------------------------------------


def _headroom(lhs: LogReal, rhs: LogReal) -> float:
    """Signed margin, positive iff lhs < rhs.

    The magnitude is log1p(|rhs - lhs|), which stays finite on the theta
    scale and keeps the sign aligned with the pass direction.
    """
    c = rhs.compare(lhs)
    if c == 0:
        return 0.0
    g = (rhs - lhs).abs().log_magnitude
    if g == -math.inf:
        return 0.0
    return float(c * (g if g > 50.0 else math.log1p(math.exp(g))))


def _le_with_slack(lhs: LogReal, rhs: LogReal, rel: float = _REL_TOL) -> bool:
    if lhs.compare(rhs) <= 0:
        return True
    if lhs.sign > 0 and rhs.sign > 0:
        return lhs.log_magnitude <= rhs.log_magnitude + rel * max(abs(rhs.log_magnitude), 1.0)
    return False


def _depth_of(point: complex, label: str) -> float:
    mod = abs(point)
    if not mod < 1.0:
        raise DomainError(f"{label} must lie inside the open disk, got |{label}| = {mod}")
    return float(mod)


def nearby_point_bounds(
    block: BuildingBlock,
    result: MinorantResult,
    z: complex,
    w: complex,
) -> CheckReport:
    """Bounds relating the block at w to theta at the basepoint z.

    Precondition (a usage error when violated): |w - z| < theta(1-|z|)^(-2).
    For deep basepoints that radius is far below float spacing, so the only
    representable companion is w = z itself; genuinely distinct pairs exist
    only at shallow depths.

    Always checked: |theta(1-|z|) - theta(1-|w|)| < 1.  The conditional
    estimates are included according to where the basepoint depth t sits
    against the block:

    * lambda(t) <= (2/5) lam:  (1+gamma_n) h(w) < theta(1-|z|);
    * lambda(t) > lam/3:  2|log|H'(w)|| + h(w) <= (3/2) theta(1-|z|);
    * additionally |arg(1-z)| > pi/(2 lam'):
      2 log|H'(w)| + h(w) <= theta(1-|z|)/(1+gamma_n).
    """
    z = complex(z)
    w = complex(w)
    mod_z = _depth_of(z, "z")
    _depth_of(w, "w")
    s_z = 1.0 - mod_z
    theta_z = regularized_theta(result, s_z)
    lam_z = theta_z.log_magnitude

    sep = abs(w - z)
    if sep > 0.0 and math.log(sep) >= -2.0 * lam_z:
        raise DomainError(
            f"pair precondition violated: |w - z| = {sep:.3g} is not below "
            f"theta^(-2) = exp({-2.0 * lam_z:.6g})"
        )

    t = -math.log(s_z)
    lam_t = float(result.lambda_at(t))
    theta_w = regularized_theta(result, 1.0 - abs(w))
    checks: list[PropertyCheck] = []

    diff = (theta_z - theta_w).abs()
    checks.append(
        PropertyCheck(
            "theta_proximity",
            bool(diff < LogReal.one()),
            float(-diff.log_magnitude) if diff.log_magnitude != -math.inf else math.inf,
            f"t = {t:.6g}",
        )
    )

    _, h_w = block_eval(block, w)
    shallow_gate = lam_t <= 0.4 * block.lam
    deep_gate = lam_t > block.lam / 3.0
    arg_z = math.atan2((1.0 - z).imag, (1.0 - z).real)
    angular_gate = deep_gate and abs(arg_z) > math.pi / (2.0 * block.lam_prime)
    lg1p = _log1p_gamma(block.lam)

    if shallow_gate:
        lhs = LogReal.from_log(lg1p + h_w.log_magnitude, h_w.sign)
        checks.append(
            PropertyCheck(
                "shallow_bound",
                _le_with_slack(lhs, theta_z),
                _headroom(lhs, theta_z),
                f"t = {t:.6g}",
            )
        )
    if deep_gate:
        hp = block_derivative(block, w)
        lhs = LogReal.from_float(2.0 * abs(hp.log_magnitude)) + h_w
        rhs = theta_z.scaled(1.5)
        checks.append(
            PropertyCheck(
                "derivative_sum_bound",
                _le_with_slack(lhs, rhs),
                _headroom(lhs, rhs),
                f"t = {t:.6g}",
            )
        )
        if angular_gate:
            lhs2 = LogReal.from_float(2.0 * hp.log_magnitude) + h_w
            rhs2 = theta_z.scaled(1.0 / (1.0 + block.gamma_n))
            checks.append(
                PropertyCheck(
                    "angular_derivative_bound",
                    _le_with_slack(lhs2, rhs2),
                    _headroom(lhs2, rhs2),
                    f"arg(1-z) = {arg_z:.3g}",
                )
            )

    return CheckReport(
        lemma="pair-bounds",
        subject=block.as_dict(),
        checks=tuple(checks),
        data={
            "z": [z.real, z.imag],
            "w": [w.real, w.imag],
            "t": t,
            "lambda_t": lam_t,
            "separation": sep,
            "shallow_gate": shallow_gate,
            "deep_gate": deep_gate,
            "angular_gate": angular_gate,
        },
        below_regime=not _in_regime(block),
    )


def derivative_ratio_bounds(
    block: BuildingBlock,
    result: MinorantResult,
    z: complex,
    xi: complex,
) -> CheckReport:
    """Growth of g = exp(H/2) between two nearby points.

    Precondition: |xi - z| < theta(1-|z|)^(-3).  Both |g(xi)/g(z)| and
    |g'(xi)/g(z)| are checked against exp[theta(1-|z|)/(1+gamma_n) -
    lambda(t)], t the depth of z.  The ratios are handled through their
    logarithms, which are themselves values on the theta scale.
    """
    z = complex(z)
    xi = complex(xi)
    mod_z = _depth_of(z, "z")
    _depth_of(xi, "xi")
    s_z = 1.0 - mod_z
    theta_z = regularized_theta(result, s_z)
    lam_z = theta_z.log_magnitude

    sep = abs(xi - z)
    if sep > 0.0 and math.log(sep) >= -3.0 * lam_z:
        raise DomainError(
            f"ratio precondition violated: |xi - z| = {sep:.3g} is not below "
            f"theta^(-3) = exp({-3.0 * lam_z:.6g})"
        )

    t = -math.log(s_z)
    lam_t = float(result.lambda_at(t))
    _, h_z = block_eval(block, z)
    _, h_xi = block_eval(block, xi)
    hp_xi = block_derivative(block, xi)

    rhs = theta_z.scaled(1.0 / (1.0 + block.gamma_n)) - LogReal.from_float(lam_t)
    log_value_ratio = (h_xi - h_z).scaled(0.5)
    log_deriv_ratio = LogReal.from_float(hp_xi.log_magnitude - math.log(2.0)) + log_value_ratio

    checks = (
        PropertyCheck(
            "value_ratio",
            _le_with_slack(log_value_ratio, rhs),
            _headroom(log_value_ratio, rhs),
            f"t = {t:.6g}",
        ),
        PropertyCheck(
            "derivative_ratio",
            _le_with_slack(log_deriv_ratio, rhs),
            _headroom(log_deriv_ratio, rhs),
            f"t = {t:.6g}",
        ),
    )
    return CheckReport(
        lemma="derivative-ratios",
        subject=block.as_dict(),
        checks=checks,
        data={
            "z": [z.real, z.imag],
            "xi": [xi.real, xi.imag],
            "t": t,
            "lambda_t": lam_t,
            "separation": sep,
        },
        below_regime=not _in_regime(block),
    )
