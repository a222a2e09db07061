import math

import numpy as np
import pytest

from berglab.errors import DomainError, QuadratureError
from berglab.quadrature import (
    DiskMesh,
    RadialMesh,
    gauss_legendre_cell,
    local_disk_mesh,
    log_integral,
)


class TestGaussCell:
    def test_exact_on_polynomials(self):
        x, w = gauss_legendre_cell(0.25, 1.75, order=4)
        for k in range(8):  # order-4 Gauss is exact through degree 7
            got = float(np.dot(w, x**k))
            want = (1.75 ** (k + 1) - 0.25 ** (k + 1)) / (k + 1)
            assert got == pytest.approx(want, rel=1e-14)

    def test_empty_cell_rejected(self):
        with pytest.raises(DomainError):
            gauss_legendre_cell(1.0, 1.0)


class TestRadialMesh:
    def test_nodes_inside_open_interval_and_sorted(self):
        mesh = RadialMesh.build(s_floor=1e-8)
        assert np.all(mesh.r > 0.0) and np.all(mesh.r < 1.0)
        assert np.all(np.diff(mesh.r) > 0)
        assert np.all(mesh.w > 0)

    def test_total_length(self):
        mesh = RadialMesh.build(s_floor=1e-8)
        assert mesh.integrate(np.ones_like(mesh.r)) == pytest.approx(1.0, abs=1e-14)

    def test_polynomial(self):
        mesh = RadialMesh.build(s_floor=1e-6)
        assert mesh.integrate(mesh.r**3) == pytest.approx(0.25, rel=1e-13)

    def test_unit_weight_moments_closed_form(self):
        # omega == 1: the (n)-th moment is 2/(2n+2) = 1/(n+1), including n = 10^4
        mesh = RadialMesh.build(s_floor=1e-8)
        log_omega = np.zeros_like(mesh.r)
        ns = np.array([0, 1, 2, 5, 17, 100, 1234, 10_000])
        got = mesh.log_moments(log_omega, ns)
        want = -np.log(ns + 1.0)
        assert got == pytest.approx(want, abs=5e-13)

    def test_moment_of_thin_weight_stays_finite_in_log(self):
        # log omega = -exp(20) ~ -4.85e8 underflows any double exp; the log
        # moment must still come out shifted by exactly that constant
        mesh = RadialMesh.build(s_floor=1e-8)
        shift = -math.exp(20.0)
        got = mesh.log_moment(np.full_like(mesh.r, shift), 3)
        assert got == pytest.approx(shift + math.log(0.25), abs=1e-12)

    def test_nan_guard(self):
        mesh = RadialMesh.build(s_floor=1e-4)
        vals = np.ones_like(mesh.r)
        vals[3] = math.nan
        with pytest.raises(QuadratureError):
            mesh.integrate(vals)


class TestDiskMesh:
    def test_total_mass_is_one(self):
        mesh = DiskMesh.build(s_floor=1e-6)
        assert mesh.area_integral(np.ones(mesh.size)) == pytest.approx(1.0, rel=1e-13)

    def test_radial_monomials(self):
        mesh = DiskMesh.build(s_floor=1e-6)
        # normalized measure: int |z|^{2n} dm = 1/(n+1)
        assert mesh.area_integral(np.abs(mesh.z) ** 2) == pytest.approx(0.5, rel=1e-12)
        assert mesh.area_integral(np.abs(mesh.z) ** 4) == pytest.approx(1.0 / 3, rel=1e-12)
        assert mesh.area_integral(np.abs(mesh.z) ** 128) == pytest.approx(1.0 / 65, rel=1e-9)

    def test_angular_modes_vanish(self):
        # midpoint rule in the angle integrates e^{ik theta} to 0 exactly for
        # 0 < k < M; tests the mean value property int Re z^k dA = 0
        mesh = DiskMesh.build(s_floor=1e-4)
        for k in (1, 2, 7):
            assert mesh.area_integral(np.real(mesh.z**k)) == pytest.approx(0.0, abs=1e-13)

    def test_log_area_integral_matches_linear(self):
        mesh = DiskMesh.build(s_floor=1e-4)
        vals = np.abs(mesh.z) ** 2 + 0.25
        got = mesh.log_area_integral(np.log(vals))
        want = math.log(0.5 + 0.25)
        assert got == pytest.approx(want, rel=1e-12)

    def test_shells_raise_angular_resolution(self):
        # comb of width-delta bumps: the shell zone must carry enough angular
        # nodes to resolve each bump (several per width delta at radius ~1)
        delta = 2e-3
        n_bumps = 100
        m_fine = int(6 * 2 * math.pi / delta)  # ~6 nodes per bump width
        plain = DiskMesh.build(s_floor=1e-5, base_angular=64)
        shelled = DiskMesh.build(s_floor=1e-5, base_angular=64, shells=[(delta, m_fine)])
        assert shelled.size > plain.size
        r0 = 1.0 - delta

        def comb(z):
            vals = np.zeros(z.shape)
            for k in range(n_bumps):
                zeta = r0 * np.exp(2j * math.pi * k / n_bumps)
                vals += np.exp(-np.abs(z - zeta) ** 2 / (2 * delta**2))
            return vals

        got_fine = shelled.area_integral(comb(shelled.z))
        got_coarse = plain.area_integral(comb(plain.z))
        ref_mesh = DiskMesh.build(
            s_floor=1e-5, base_angular=64, shells=[(delta, 2 * m_fine)], subdiv=16
        )
        ref = ref_mesh.area_integral(comb(ref_mesh.z))
        assert got_fine == pytest.approx(ref, rel=1e-4)
        assert abs(got_coarse - ref) > 100 * abs(got_fine - ref)

    def test_infinite_log_integral_rejected(self):
        mesh = DiskMesh.build(s_floor=1e-4)
        vals = np.zeros(mesh.size)
        vals[0] = math.inf
        with pytest.raises(QuadratureError):
            mesh.log_area_integral(vals)


class TestLocalDiskMesh:
    def test_mass(self):
        z, log_w = local_disk_mesh(0.3 + 0.4j, 0.05)
        assert np.exp(log_w).sum() == pytest.approx(0.05**2, rel=1e-10)

    def test_resolves_sharp_gaussian(self):
        # mass of exp(-|z-c|^2/sigma^2) with sigma six orders below the radius
        c, radius, sigma = 0.9 + 0.05j, 1e-2, 1e-8
        z, log_w = local_disk_mesh(c, radius)
        log_vals = -np.abs(z - c) ** 2 / sigma**2
        got = log_integral(log_vals, log_w)
        assert got == pytest.approx(math.log(sigma**2), abs=1e-4)

    def test_centroid(self):
        c = -0.2 + 0.7j
        z, log_w = local_disk_mesh(c, 0.03)
        w = np.exp(log_w)
        centroid = complex((z * w).sum() / w.sum())
        assert abs(centroid - c) < 1e-12
