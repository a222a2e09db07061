"""Dyadic Gauss-Legendre meshes on the disk and its radii.

Radial meshes decompose [0, 1) by the distance to the boundary s = 1 - r
into dyadic cells, each subdivided and carrying a fixed-order Gauss rule.
This resolves integrands that live on geometric scales in s (moment
integrands, node-scale bumps) with a node count logarithmic in the smallest
scale.  The leftover sliver s in [0, s_floor] is covered by one more
subdivided cell with interior nodes, so weights that are finite up to the
boundary integrate correctly while nothing is ever evaluated at r = 1.

All heavy integrals are assembled in the log domain via logsumexp; see
`log_integral`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, QuadratureError
from .logdomain import logsumexp

__all__ = [
    "RadialMesh",
    "DiskMesh",
    "local_disk_mesh",
    "log_integral",
    "gauss_legendre_cell",
]


@lru_cache(maxsize=None)
def _leggauss(order: int) -> tuple[tuple[float, ...], tuple[float, ...]]:
    x, w = np.polynomial.legendre.leggauss(order)
    return tuple(x), tuple(w)


def gauss_legendre_cell(a: float, b: float, order: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [a, b]."""
    if not a < b:
        raise DomainError(f"empty cell [{a}, {b}]")
    x, w = _leggauss(order)
    x = np.asarray(x)
    w = np.asarray(w)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return mid + half * x, half * w


def _dyadic_cells(s_floor: float) -> list[tuple[float, float]]:
    """Cells [2^-(j+1), 2^-j] down past s_floor, plus the sliver [0, 2^-J]."""
    if not 0.0 < s_floor < 0.5:
        raise DomainError(f"s_floor must lie in (0, 0.5), got {s_floor}")
    levels = math.ceil(-math.log2(s_floor))
    cells = [(0.5 ** (j + 1), 0.5**j) for j in range(levels)]
    cells.append((0.0, 0.5**levels))
    return cells


def _radial_nodes(s_floor: float, subdiv: int, gl_order: int) -> tuple[np.ndarray, np.ndarray]:
    s_parts: list[np.ndarray] = []
    w_parts: list[np.ndarray] = []
    for s_lo, s_hi in _dyadic_cells(s_floor):
        edges = np.linspace(s_lo, s_hi, subdiv + 1)
        for k in range(subdiv):
            sn, wn = gauss_legendre_cell(edges[k], edges[k + 1], gl_order)
            s_parts.append(sn)
            w_parts.append(wn)
    s = np.concatenate(s_parts)
    w = np.concatenate(w_parts)
    r = 1.0 - s
    order = np.argsort(r, kind="stable")
    return r[order], w[order]


def log_integral(log_vals: np.ndarray, log_w: np.ndarray, *, where: str = "") -> float:
    """log of sum(w * v) for nonnegative v given in logs.  NaN or a +inf
    total raises QuadratureError: an infinite integral is never legitimate
    downstream."""
    if np.isnan(log_vals).any():
        raise QuadratureError("NaN integrand value", where=where or None)
    total = logsumexp(log_vals + log_w)
    if total == math.inf:
        raise QuadratureError("integral overflowed to +inf", where=where or None)
    return total


@dataclass(frozen=True)
class RadialMesh:
    """Quadrature nodes r in (0, 1) with weights for integrals in dr."""

    r: np.ndarray
    w: np.ndarray
    s_floor: float

    @staticmethod
    def build(s_floor: float = 1e-8, subdiv: int = 8, gl_order: int = 4) -> "RadialMesh":
        r, w = _radial_nodes(s_floor, subdiv, gl_order)
        return RadialMesh(r, w, s_floor)

    @property
    def log_w(self) -> np.ndarray:
        return np.log(self.w)

    def integrate(self, vals: np.ndarray) -> float:
        if np.isnan(vals).any():
            raise QuadratureError("NaN integrand value", where="radial mesh")
        return float(np.dot(self.w, vals))

    def log_moments(self, log_omega_vals: np.ndarray, ns: Sequence[int] | np.ndarray) -> np.ndarray:
        """log of the radial moments 2*int_0^1 r^(2n+1) omega(r) dr, vectorized in n.

        Works entirely in the log domain, so weights thinner than the double
        range still produce finite moment logs.
        """
        ns_arr = np.atleast_1d(np.asarray(ns, dtype=float))
        log_r = np.log(self.r)
        base = self.log_w + log_omega_vals  # per-node, n-independent
        if np.isnan(base).any():
            raise QuadratureError("NaN weight value on radial mesh", where="log_moments")
        out = np.empty(ns_arr.size)
        chunk = max(1, int(4e6 // max(self.r.size, 1)))
        for start in range(0, ns_arr.size, chunk):
            block = ns_arr[start : start + chunk]
            expo = base[None, :] + (2.0 * block[:, None] + 1.0) * log_r[None, :]
            m = expo.max(axis=1)
            safe = m != -math.inf
            s = np.where(
                safe[:, None], np.exp(expo - np.where(safe, m, 0.0)[:, None]), 0.0
            ).sum(axis=1)
            out[start : start + chunk] = np.where(safe, m + np.log(s), -math.inf)
        return math.log(2.0) + out

    def log_moment(self, log_omega_vals: np.ndarray, n: float) -> float:
        return float(self.log_moments(log_omega_vals, [n])[0])


@dataclass(frozen=True)
class DiskMesh:
    """Quadrature on the unit disk against normalized area measure
    dm = dx dy / pi (the measure of the whole disk is 1).

    Angular resolution is a midpoint rule whose count may be raised on
    annuli near prescribed scales: a shell entry (scale, count) applies
    `count` angular nodes on the annulus scale/8 <= 1-r <= 8*scale.  The
    caller decides the count from the angular structure it expects there;
    nothing finer than `angular_cap` is ever allocated.
    """

    z: np.ndarray
    log_w: np.ndarray
    r: np.ndarray
    s_floor: float

    @staticmethod
    def build(
        s_floor: float,
        *,
        base_angular: int = 256,
        shells: Sequence[tuple[float, int]] = (),
        subdiv: int = 8,
        gl_order: int = 4,
        angular_cap: int = 65536,
        shell_factor: float = 8.0,
    ) -> "DiskMesh":
        r, w = _radial_nodes(s_floor, subdiv, gl_order)
        s = 1.0 - r
        counts = np.full(r.size, base_angular, dtype=int)
        for scale, n_angular in shells:
            zone = (s >= scale / shell_factor) & (s <= scale * shell_factor)
            counts[zone] = np.maximum(counts[zone], n_angular)
        counts = np.minimum(counts, angular_cap)

        z_parts: list[np.ndarray] = []
        lw_parts: list[np.ndarray] = []
        r_parts: list[np.ndarray] = []
        for i in range(r.size):
            m = int(counts[i])
            theta = (2.0 * math.pi / m) * (np.arange(m) + 0.5)
            z_parts.append(r[i] * np.exp(1j * theta))
            # dm = r dr dtheta / pi
            lw_parts.append(
                np.full(m, math.log(w[i]) + math.log(r[i]) + math.log(2.0 / m))
            )
            r_parts.append(np.full(m, r[i]))
        return DiskMesh(
            np.concatenate(z_parts), np.concatenate(lw_parts), np.concatenate(r_parts), s_floor
        )

    @property
    def size(self) -> int:
        return int(self.z.size)

    def log_area_integral(self, log_vals: np.ndarray, *, where: str = "") -> float:
        return log_integral(log_vals, self.log_w, where=where or "disk mesh")

    def area_integral(self, vals: np.ndarray) -> float:
        if np.isnan(vals).any():
            raise QuadratureError("NaN integrand value", where="disk mesh")
        return float(np.dot(np.exp(self.log_w), vals))


def local_disk_mesh(
    center: complex,
    radius: float,
    *,
    radial_cells: int = 48,
    gl_order: int = 4,
    angular: int = 512,
    rho_floor_ratio: float = 1e-9,
) -> tuple[np.ndarray, np.ndarray]:
    """Polar mesh on the disk D(center, radius) with geometric radial cells.

    Radii decrease geometrically from `radius` down to radius*rho_floor_ratio
    (plus one innermost cell reaching 0), so sharply peaked integrands are
    resolved whether they concentrate at the center or near the rim.
    Returns (z, log_w) for integrals against the same normalized measure as
    DiskMesh (dm = dx dy / pi, so a full disk of radius R has mass R^2).
    """
    if radius <= 0:
        raise DomainError("local disk radius must be positive")
    if not 0 < rho_floor_ratio < 1:
        raise DomainError("rho_floor_ratio must lie in (0, 1)")
    bounds = radius * np.exp(np.linspace(0.0, math.log(rho_floor_ratio), radial_cells + 1))
    bounds = np.concatenate([bounds, [0.0]])  # innermost cell touches 0
    rho_parts: list[np.ndarray] = []
    w_parts: list[np.ndarray] = []
    for i in range(bounds.size - 1):
        hi, lo = float(bounds[i]), float(bounds[i + 1])
        rn, wn = gauss_legendre_cell(lo, hi, gl_order)
        rho_parts.append(rn)
        w_parts.append(wn)
    rho = np.concatenate(rho_parts)
    w_rho = np.concatenate(w_parts)

    phi0 = math.atan2(center.imag, center.real)
    alpha = phi0 + (2.0 * math.pi / angular) * (np.arange(angular) + 0.5)
    ring = np.exp(1j * alpha)

    z = (center + rho[:, None] * ring[None, :]).ravel()
    log_w = (
        np.log(w_rho)[:, None]
        + np.log(rho)[:, None]
        + math.log(2.0 / angular)
    )
    return z, np.broadcast_to(log_w, (rho.size, angular)).ravel().copy()
