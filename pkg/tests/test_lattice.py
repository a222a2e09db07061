"""Lattice levels, finite Blaschke products, interpolation, growth bounds."""

import json
import math

import numpy as np
import pytest

from berglab.errors import DomainError
from berglab.lattice import (
    LatticeLevel,
    SubsetMask,
    blaschke_eval,
    build_level,
    growth_bound_check,
    interpolation_identity,
    node_derivative,
    node_derivative_signed,
    pseudo_hyperbolic,
    verify_ring_blaschke,
    verify_subset_blaschke,
)
from berglab.logdomain import LogComplex

KAPPA_DEEP = math.exp(-5.0)
R_DEEP = 1.0 - math.exp(-12.0)


@pytest.fixture(scope="module")
def deep_level():
    return build_level(KAPPA_DEEP, R_DEEP, "centers")


@pytest.fixture(scope="module")
def mid_level():
    # kappa / (1 - r) = 0.8 / 0.1 is exactly 8 in floats
    return build_level(0.8, 0.9, "centers")


@pytest.fixture(scope="module")
def level_148():
    return build_level(KAPPA_DEEP, 1.0 - math.exp(-10.0), "centers")


@pytest.fixture(scope="module")
def two_levels():
    return [build_level(0.8, 0.9, "centers", n=1), build_level(0.8, 0.95, "centers", n=2)]


@pytest.fixture(scope="module")
def shallow_levels():
    # direct construction below build_level's 4/5 floor: the type allows any
    # radius in (0, 1), and shallow zeros keep the contour integrand smooth
    one = LatticeLevel(
        n=1, kappa=0.8, r_n=0.2, N_n=1,
        nodes=np.array([0.2 + 0j]), sample_points=np.array([0.2 + 0j]),
    )
    two = LatticeLevel(
        n=2, kappa=0.8, r_n=0.4, N_n=1,
        nodes=np.array([0.4 + 0j]), sample_points=np.array([0.4 + 0j]),
    )
    return [SubsetMask.full(one), SubsetMask.full(two)]


class TestPseudoHyperbolic:
    def test_identity_and_symmetry(self):
        assert pseudo_hyperbolic(0.3 + 0.1j, 0.3 + 0.1j) == 0.0
        a, b = 0.5 + 0.2j, -0.1 + 0.6j
        assert pseudo_hyperbolic(a, b) == pytest.approx(pseudo_hyperbolic(b, a), rel=1e-15)

    def test_distance_to_origin_is_modulus(self):
        assert pseudo_hyperbolic(0.0, 0.37 - 0.2j) == pytest.approx(abs(0.37 - 0.2j), rel=1e-15)

    def test_boundary_point_rejected(self):
        with pytest.raises(DomainError, match="open disk"):
            pseudo_hyperbolic(1.0, 0.5)


class TestBuildLevel:
    def test_deep_level_count(self, deep_level):
        # floor(e^-5 / e^-12) = floor(e^7)
        assert deep_level.N_n == 1096
        assert deep_level.N_n <= KAPPA_DEEP / (1.0 - R_DEEP) < deep_level.N_n + 1

    def test_example_count_148(self):
        lv = build_level(KAPPA_DEEP, 1.0 - math.exp(-10.0), "centers")
        assert lv.N_n == 148

    def test_centers_rule_puts_samples_at_nodes(self, mid_level):
        assert mid_level.N_n == 8
        assert np.array_equal(mid_level.sample_points, mid_level.nodes)
        assert mid_level.rule == "centers"

    def test_perturbed_is_seed_deterministic(self):
        a = build_level(KAPPA_DEEP, R_DEEP, "perturbed", seed=7)
        b = build_level(KAPPA_DEEP, R_DEEP, "perturbed", seed=7)
        assert np.array_equal(a.sample_points, b.sample_points)
        c = build_level(KAPPA_DEEP, R_DEEP, "perturbed", seed=8)
        assert not np.array_equal(a.sample_points, c.sample_points)

    def test_perturbed_stays_inside_cells(self):
        lv = build_level(0.8, 0.9, "perturbed", seed=11)
        cell = (1.0 - lv.r_n) ** 2
        assert np.all(np.abs(lv.sample_points - lv.nodes) < cell)

    def test_minimizer_picks_best_net_point(self):
        lv = build_level(0.5, 0.9, "minimizer", minimize=lambda z: abs(z - 0.95))
        cell = (1.0 - 0.9) ** 2
        # the net point at radius 0.97 cell, angle 0 is nearest to 0.95
        assert lv.sample_points[0] == lv.nodes[0] + 0.97 * cell

    def test_preconditions(self):
        with pytest.raises(DomainError, match="4/5"):
            build_level(0.8, 0.7)
        with pytest.raises(DomainError, match="no room"):
            build_level(1e-6, 0.9)
        with pytest.raises(DomainError, match="seed"):
            build_level(0.8, 0.9, "perturbed")
        with pytest.raises(DomainError, match="score"):
            build_level(0.8, 0.9, "minimizer")
        with pytest.raises(DomainError, match="unknown placement rule"):
            build_level(0.8, 0.9, "oops")

    def test_json_dump_shape(self, mid_level):
        d = mid_level.to_json_dict()
        assert sorted(d) == ["N_n", "kappa", "n", "nodes", "r_n", "rule", "sample_points"]
        assert len(d["nodes"]) == 8 and len(d["nodes"][0]) == 2
        json.dumps(d, sort_keys=True)


class TestLatticeLevelInvariants:
    def test_wrong_count_rejected(self):
        nodes = 0.9 * np.exp(2j * math.pi * np.arange(4) / 4)
        with pytest.raises(DomainError, match="N <= kappa"):
            LatticeLevel(n=1, kappa=0.8, r_n=0.9, N_n=4, nodes=nodes, sample_points=nodes)

    def test_unequal_spacing_rejected(self):
        nodes = 0.9 * np.exp(2j * math.pi * np.arange(8) / 8)
        bad = nodes.copy()
        bad[3] *= np.exp(1e-6j)
        with pytest.raises(DomainError, match="equally spaced"):
            LatticeLevel(n=1, kappa=0.8, r_n=0.9, N_n=8, nodes=bad, sample_points=nodes)

    def test_sample_outside_cell_rejected(self):
        nodes = 0.9 * np.exp(2j * math.pi * np.arange(8) / 8)
        samples = nodes.copy()
        samples[2] += 0.02  # cell radius is 0.01
        with pytest.raises(DomainError, match="outside the open cell"):
            LatticeLevel(n=1, kappa=0.8, r_n=0.9, N_n=8, nodes=nodes, sample_points=samples)

    def test_delta_property(self, mid_level):
        assert mid_level.delta_n == pytest.approx(0.1, abs=1e-15)


class TestSubsetMask:
    def test_sorts_and_validates(self, mid_level):
        m = SubsetMask(mid_level, (5, 1, 3))
        assert m.selected == (1, 3, 5)
        assert m.sigma == pytest.approx(1.0 - 3.0 / 8.0, rel=1e-15)
        assert np.array_equal(m.points, mid_level.sample_points[[1, 3, 5]])

    def test_full_mask(self, mid_level):
        m = SubsetMask.full(mid_level)
        assert m.sigma == 0.0
        assert len(m.selected) == 8

    def test_duplicate_and_range_errors(self, mid_level):
        with pytest.raises(DomainError, match="distinct"):
            SubsetMask(mid_level, (1, 1))
        with pytest.raises(DomainError, match="lie in"):
            SubsetMask(mid_level, (8,))


class TestBlaschkeEval:
    def test_zero_at_node(self, mid_level):
        v = blaschke_eval(mid_level.sample_points, complex(mid_level.sample_points[0]))
        assert v.is_zero

    def test_empty_product_is_one(self):
        v = blaschke_eval(np.array([], dtype=complex), 0.3)
        assert v.log_magnitude == 0.0 and v.phase == 0.0

    def test_multiplicativity(self, mid_level):
        pts = mid_level.sample_points
        z = 0.3 + 0.4j
        whole = blaschke_eval(pts, z)
        left = blaschke_eval(pts[:3], z)
        right = blaschke_eval(pts[3:], z)
        prod = left * right
        assert whole.log_magnitude == pytest.approx(prod.log_magnitude, rel=1e-12)
        assert whole.phase == pytest.approx(prod.phase, abs=1e-12)

    def test_deep_level_value_at_origin(self, deep_level):
        v = blaschke_eval(deep_level.sample_points, 0.0)
        assert abs(v.log_magnitude - deep_level.N_n * math.log(R_DEEP)) <= 1e-12
        assert abs(v.log_magnitude + KAPPA_DEEP) <= 1e-5

    def test_modulus_at_most_one_on_closed_disk(self, mid_level):
        rng = np.random.default_rng(3)
        inner = np.sqrt(rng.uniform(0, 1, 50)) * np.exp(2j * np.pi * rng.uniform(0, 1, 50))
        boundary = np.exp(2j * np.pi * rng.uniform(0, 1, 20))
        for z in np.concatenate([inner, boundary]):
            assert blaschke_eval(mid_level.sample_points, complex(z)).log_magnitude <= 1e-12

    def test_zeros_outside_disk_rejected(self):
        with pytest.raises(DomainError, match="strictly inside"):
            blaschke_eval(np.array([1.0 + 0j]), 0.3)
        with pytest.raises(DomainError, match="closed disk"):
            blaschke_eval(np.array([0.3 + 0j]), 1.5)


class TestNodeDerivative:
    def test_single_zero_closed_form(self):
        a = 0.37
        nd = node_derivative([a], 0)
        assert nd.log_magnitude == pytest.approx(-math.log(1.0 - a * a), rel=1e-14)

    def test_symmetric_pair_against_finite_differences(self):
        pts = np.array([0.3, -0.3], dtype=complex)
        h = 1e-6
        def b(z):
            return blaschke_eval(pts, z).to_complex()
        fd = abs((b(0.3 + h) - b(0.3 - h)) / (2 * h))
        nd = node_derivative(pts, 0).to_float()
        assert abs(fd - nd) / nd <= 1e-6

    def test_signed_matches_magnitude_and_direction(self):
        pts = np.array([0.3, -0.3], dtype=complex)
        signed = node_derivative_signed(pts, 0)
        assert math.exp(signed.log_magnitude) == pytest.approx(
            node_derivative(pts, 0).to_float(), rel=1e-12
        )
        h = 1e-6
        def b(z):
            return blaschke_eval(pts, z).to_complex()
        fd = (b(0.3 + h) - b(0.3 - h)) / (2 * h)
        got = signed.to_complex()
        assert abs(got - fd) / abs(fd) <= 1e-5

    def test_duplicate_zeros_rejected(self):
        with pytest.raises(DomainError, match="simple"):
            node_derivative(np.array([0.3, 0.3]), 0)

    def test_index_range(self):
        with pytest.raises(DomainError, match="outside"):
            node_derivative(np.array([0.3]), 1)


class TestRingBlaschke:
    def test_deep_centers_pass(self, deep_level):
        rep = verify_ring_blaschke(deep_level, 0.5, 0.02)
        assert rep.lemma == "ring-blaschke"
        assert rep.all_pass and not rep.below_regime
        assert [c.name for c in rep.checks] == [
            "node_derivative_floor", "ring_band", "comparator_band",
        ]
        # dev at the ring is about 3.9e-6, nearly all of the 0.02 band remains
        assert rep["ring_band"].margin > 0.0199
        assert rep.data["worst_band_deviation"] < 1e-5

    def test_centers_match_comparator_exactly(self, deep_level):
        rep = verify_ring_blaschke(deep_level, 0.5, 0.02)
        assert rep.data["comparator_gap"] <= 1e-12

    def test_empirical_constant_scale(self, deep_level):
        # min |B'| / N_n concentrates near 1 / (2 kappa) for small kappa
        rep = verify_ring_blaschke(deep_level, 0.5, 0.02)
        c = rep.data["empirical_node_constant"]
        assert 0.5 / KAPPA_DEEP < c < 1.0 / KAPPA_DEEP
        assert rep["node_derivative_floor"].margin == c

    def test_perturbed_passes_band(self):
        lv = build_level(KAPPA_DEEP, R_DEEP, "perturbed", seed=7)
        rep = verify_ring_blaschke(lv, 0.5, 0.02)
        assert rep.all_pass and not rep.below_regime
        assert rep.data["comparator_gap"] < 1e-6

    def test_grid_size_floor(self, deep_level):
        rep = verify_ring_blaschke(deep_level, 0.5, 0.02)
        assert rep.data["angular_points"] == 4 * deep_level.N_n

    def test_shallow_level_flagged_and_fails_honestly(self):
        lv = build_level(0.5, 0.85, "centers")
        rep = verify_ring_blaschke(lv, 0.5, 0.01)
        assert rep.below_regime
        assert not rep["ring_band"].passed
        assert not rep["comparator_band"].passed
        assert rep["node_derivative_floor"].passed

    def test_bad_inputs(self, mid_level):
        with pytest.raises(DomainError, match="ring radius"):
            verify_ring_blaschke(mid_level, 1.0, 0.02)
        with pytest.raises(DomainError, match="band width"):
            verify_ring_blaschke(mid_level, 0.5, 0.0)

    def test_report_serializes(self, deep_level):
        rep = verify_ring_blaschke(deep_level, 0.5, 0.02)
        json.dumps(rep.to_json_dict(), sort_keys=True)


class TestSubsetBlaschke:
    def test_full_mask_reduces_to_ring_band(self, level_148):
        rep = verify_subset_blaschke(SubsetMask.full(level_148), 0.5, 0.02)
        assert rep.lemma == "subset-blaschke"
        assert rep.all_pass
        assert rep.subject["sigma"] == 0.0
        # with sigma = 0 both margins are eps minus the tiny band deviation
        for c in rep.checks:
            assert 0.019 < c.margin < 0.031

    def test_drop_one_of_148(self, level_148):
        mask = SubsetMask(level_148, tuple(k for k in range(level_148.N_n) if k != 3))
        rep = verify_subset_blaschke(mask, 0.5, 0.02)
        assert rep.all_pass
        assert mask.sigma == pytest.approx(1.0 / 148.0, rel=1e-10)

    def test_drop_every_other(self, level_148):
        mask = SubsetMask(level_148, tuple(range(0, level_148.N_n, 2)))
        rep = verify_subset_blaschke(mask, 0.5, 0.02)
        assert rep.all_pass
        assert rep.subject["sigma"] == 0.5
        assert rep["band_lower"].passed and rep["band_upper"].passed

    def test_check_names(self, level_148):
        rep = verify_subset_blaschke(SubsetMask.full(level_148), 0.5, 0.02)
        assert [c.name for c in rep.checks] == ["band_lower", "band_upper"]


class TestInterpolationIdentity:
    def test_constant_function(self, shallow_levels):
        rep = interpolation_identity(shallow_levels, lambda w: 1.0 + 0j, 0.1, 0.9)
        assert rep.lemma == "interpolation-identity"
        assert rep.all_pass
        assert rep.data["relative_residual"] < 1e-8
        assert rep.data["contour_points"] == 64

    def test_cubic_two_levels(self, shallow_levels):
        rep = interpolation_identity(shallow_levels, lambda w: w ** 3, 0.1, 0.9)
        assert rep.all_pass
        assert rep.data["relative_residual"] < 1e-8

    def test_product_itself_gives_minus_one(self, shallow_levels):
        def f(w):
            out = 1.0 + 0j
            for m in shallow_levels:
                out *= blaschke_eval(m.points, w).to_complex()
            return out
        rep = interpolation_identity(shallow_levels, f, 0.1, 0.9)
        # residues vanish at the zeros, so both sides collapse to -1
        lhs = complex(*rep.data["lhs"])
        assert abs(lhs - (-1.0)) < 1e-12
        assert rep.data["relative_residual"] < 1e-12

    def test_residual_shrinks_on_doubling(self, mid_level):
        masks = [SubsetMask.full(mid_level)]
        r8 = interpolation_identity(masks, lambda w: w ** 3, 0.1, 0.97, oversample=8)
        r16 = interpolation_identity(masks, lambda w: w ** 3, 0.1, 0.97, oversample=16)
        assert r8.data["contour_points"] == 64
        assert r16.data["contour_points"] == 128
        assert r8.data["relative_residual"] >= 4.0 * r16.data["relative_residual"]

    def test_node_on_contour_rejected(self, mid_level):
        masks = [SubsetMask.full(mid_level)]
        with pytest.raises(DomainError, match="on the contour"):
            interpolation_identity(masks, lambda w: 1.0, 0.1, 0.9 + 5e-10)

    def test_point_outside_contour_rejected(self, mid_level):
        masks = [SubsetMask.full(mid_level)]
        with pytest.raises(DomainError, match="must satisfy"):
            interpolation_identity(masks, lambda w: 1.0, 0.95, 0.9)

    def test_point_at_sample_rejected(self, shallow_levels):
        with pytest.raises(DomainError, match="coincides"):
            interpolation_identity(shallow_levels, lambda w: 1.0, 0.2, 0.9)

    def test_needs_masks(self):
        with pytest.raises(DomainError, match="at least one"):
            interpolation_identity([], lambda w: 1.0, 0.1, 0.9)


class TestGrowthBound:
    def test_constant_function(self, two_levels):
        logs = [np.zeros(lv.N_n) for lv in two_levels]
        rep = growth_bound_check(two_levels, logs, 2.0, lambda z: LogComplex(0.0, 0.0))
        assert rep.lemma == "lattice-growth"
        assert rep.all_pass
        assert rep.data["sigmas"] == [0.0, 0.0]
        # envelope constant: max over the grid of 0 - 1/(1-|z|), at |z| = 1/8
        assert rep.data["log_envelope_constant"] == pytest.approx(-8.0 / 7.0, rel=1e-12)

    def test_check_names(self, two_levels):
        logs = [np.zeros(lv.N_n) for lv in two_levels]
        rep = growth_bound_check(two_levels, logs, 2.0, lambda z: LogComplex(0.0, 0.0))
        assert [c.name for c in rep.checks] == [
            "subset_density",
            "growth_envelope",
            "normalized_product_upper",
            "ring_lower_bound",
            "node_derivative_lower",
        ]

    def test_degree_five_polynomial(self, two_levels):
        def f(z):
            z = complex(z)
            return LogComplex.from_complex(z ** 5) if z != 0 else LogComplex.zero()
        logs = [5.0 * np.log(np.abs(lv.sample_points)) for lv in two_levels]
        rep = growth_bound_check(two_levels, logs, 2.0, f)
        assert rep.all_pass
        assert rep.data["sigmas"] == [0.0, 0.0]
        assert math.isfinite(rep.data["log_node_derivative_constant"])

    def test_summability_violation_names_level(self, two_levels):
        logs = [np.zeros(lv.N_n) for lv in two_levels]
        logs[0] = logs[0].copy()
        logs[0][0] = 10.0
        with pytest.raises(DomainError, match="level n = 1"):
            growth_bound_check(two_levels, logs, 2.0, lambda z: LogComplex(0.0, 0.0))

    def test_close_levels_flagged_below_regime(self, two_levels):
        # -log(0.05) < 2 * -log(0.1): radii do not double in depth
        logs = [np.zeros(lv.N_n) for lv in two_levels]
        rep = growth_bound_check(two_levels, logs, 2.0, lambda z: LogComplex(0.0, 0.0))
        assert rep.below_regime

    def test_spread_levels_not_flagged(self):
        levels = [
            build_level(KAPPA_DEEP, 1.0 - math.exp(-6.0), "centers", n=1),
            build_level(KAPPA_DEEP, 1.0 - math.exp(-12.0), "centers", n=2),
        ]
        logs = [np.zeros(lv.N_n) for lv in levels]
        rep = growth_bound_check(levels, logs, 2.0, lambda z: LogComplex(0.0, 0.0))
        assert not rep.below_regime
        assert rep.all_pass

    def test_input_shape_errors(self, two_levels):
        logs = [np.zeros(two_levels[0].N_n)]
        with pytest.raises(DomainError, match="sample arrays"):
            growth_bound_check(two_levels, logs, 2.0, lambda z: LogComplex(0.0, 0.0))
        with pytest.raises(DomainError, match="positive"):
            growth_bound_check(
                two_levels, [np.zeros(lv.N_n) for lv in two_levels], 0.0,
                lambda z: LogComplex(0.0, 0.0),
            )

    def test_report_serializes(self, two_levels):
        logs = [np.zeros(lv.N_n) for lv in two_levels]
        rep = growth_bound_check(two_levels, logs, 2.0, lambda z: LogComplex(0.0, 0.0))
        json.dumps(rep.to_json_dict(), sort_keys=True)
