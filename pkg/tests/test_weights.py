"""Weight families, moments, bilateral extension, and the growth checks."""

import math

import numpy as np
import pytest

from berglab.errors import DomainError
from berglab.logdomain import LogReal
from berglab.weights import (
    GrowthConditionReport,
    MomentSequence,
    RadialWeight,
    check_growth_condition,
    check_moment_decay,
    extend_bilateral,
    lambda_big,
    moment,
    moment_decay_weight_bound,
    moments,
    read_sampled_weight_csv,
    theta_big,
    tilde_weight,
    write_moments_csv,
)


# -- construction and validation ---------------------------------------------


def test_family_validation():
    with pytest.raises(DomainError):
        RadialWeight.single_exp(0.5, 0.5)
    with pytest.raises(DomainError):
        RadialWeight.exp_exp(-1.0, 1.0, 0.5)
    with pytest.raises(DomainError):
        RadialWeight.exp_exp(1.0, 1.0, 1.5)
    with pytest.raises(DomainError):
        RadialWeight.single_exp(1.0, 0.0)


def test_sampled_rejects_values_above_one_over_e():
    s = np.array([0.5, 0.25, 0.125])
    with pytest.raises(DomainError):
        RadialWeight.sampled(s, np.array([-2.0, -0.9, -4.0]), 0.5)


def test_sampled_rejects_increasing_omega():
    s = np.array([0.5, 0.25, 0.125])
    # omega must not increase toward t = 1: Theta samples must be monotone
    with pytest.raises(DomainError):
        RadialWeight.sampled(s, np.array([-2.0, -8.0, -4.0]), 0.5)


# -- Theta and Lambda ---------------------------------------------------------


def test_theta_closed_forms():
    w1 = RadialWeight.single_exp(1.0, 0.5)
    assert theta_big(w1, 0.01).log_magnitude == pytest.approx(math.log(100.0), rel=1e-14)
    w2 = RadialWeight.exp_exp(1.0, 1.0, 0.5)
    assert theta_big(w2, 0.1).log_magnitude == pytest.approx(10.0, rel=1e-14)
    with pytest.raises(DomainError):
        theta_big(w1, 1.0)
    with pytest.raises(DomainError):
        theta_big(RadialWeight.unit(), 0.5)


def test_lambda_closed_forms_and_gate():
    w2 = RadialWeight.exp_exp(1.0, 1.0, 0.5)
    for x in [0.0, 1.0, 3.5, 20.0]:
        assert lambda_big(w2, x) == pytest.approx(math.exp(x), rel=1e-13)
    w1 = RadialWeight.single_exp(1.0, 0.5)
    assert lambda_big(w1, 7.0) == pytest.approx(7.0, rel=1e-14)
    with pytest.raises(DomainError):
        lambda_big(w1, 0.0)  # Theta(1) = 1 exactly
    xs = np.linspace(0.1, 30.0, 200)
    lam = np.array([lambda_big(w2, float(x)) for x in xs])
    assert np.all(np.diff(lam) > 0.0)


def test_sampled_round_trip_is_exact_for_single_exp():
    # log Theta of the single_exp family is linear in x = log 1/s, so
    # piecewise-linear interpolation reproduces it exactly, knots or not,
    # and the end slopes extrapolate it exactly as well
    ref = RadialWeight.single_exp(2.0, 0.5)
    s_knots = np.geomspace(0.9, 1e-6, 40)
    log_omega = -np.exp(np.asarray(ref.lambda_at(-np.log(s_knots))))
    w = RadialWeight.sampled(s_knots, log_omega, 0.5)
    for s in [0.95, 0.9, 0.31, 0.0471, 1e-3, 2.3e-7, 1e-8]:
        got = theta_big(w, s).log_magnitude
        want = theta_big(ref, s).log_magnitude
        assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


def test_sampled_interpolation_error_is_chordal_for_exp_exp():
    # log Theta = 0.4 e^(0.28 x) is convex in x; the piecewise-linear chord
    # overestimates between knots by about (dx)^2/8 * (0.28)^2 * Lambda
    ref = RadialWeight.exp_exp(0.4, 0.28, 0.25)
    s_knots = np.geomspace(0.9, 1e-6, 40)
    log_omega = -np.exp(np.asarray(ref.lambda_at(-np.log(s_knots))))
    w = RadialWeight.sampled(s_knots, log_omega, 0.25)
    dx = math.log(0.9 / 1e-6) / 39
    for s in [0.31, 0.0471, 1e-3]:  # inside the knot range; chords need a bracket
        got = theta_big(w, s).log_magnitude
        want = theta_big(ref, s).log_magnitude
        assert got >= want * (1.0 - 1e-12)
        assert got - want <= 0.3 * dx * dx * want


# -- moments ------------------------------------------------------------------


def test_unit_weight_moments_calibration():
    w = RadialWeight.unit()
    for n in range(65):
        assert moment(w, n).to_float() == pytest.approx(1.0 / (n + 1), abs=1e-8)


def _simpson_moment_single_exp(n: int, m: int = 40_001) -> float:
    # independent float-domain oracle: 2 int_0^1 (1-s)^(2n+1) e^(-1/s) ds
    s = np.linspace(0.0, 1.0, m)
    with np.errstate(divide="ignore"):
        vals = np.where(s > 0.0, (1.0 - s) ** (2 * n + 1) * np.exp(-1.0 / np.maximum(s, 1e-300)), 0.0)
    h = s[1] - s[0]
    coeff = np.ones(m)
    coeff[1:-1:2] = 4.0
    coeff[2:-1:2] = 2.0
    return 2.0 * h / 3.0 * float(np.dot(coeff, vals))


@pytest.mark.parametrize("n", [0, 2, 7])
def test_single_exp_moment_against_simpson(n):
    w = RadialWeight.single_exp(1.0, 0.5)
    assert moment(w, n).to_float() == pytest.approx(_simpson_moment_single_exp(n), rel=1e-9)


def test_moment_sequence_trends():
    w = RadialWeight.single_exp(1.0, 0.5)
    seq = moments(w, 200)  # construction already enforces log-convexity
    logs = seq.log_values()
    assert np.all(np.diff(logs) < 0.0)  # strictly decreasing
    root_scale = logs[1:] / np.arange(1, 201)  # log Omega(n)^(1/n)
    assert np.all(np.diff(root_scale) > 0.0)  # increasing toward 0 = log 1
    assert np.all(root_scale < 0.0)


def test_moment_rejects_negative_n():
    with pytest.raises(DomainError):
        moment(RadialWeight.unit(), -1)


# -- bilateral extension ------------------------------------------------------


def test_bilateral_unit_values():
    seq = moments(RadialWeight.unit(), 8)
    assert extend_bilateral(seq, -1).to_float() == pytest.approx(1.0, rel=1e-10)
    assert extend_bilateral(seq, -2).to_float() == pytest.approx(2.0, rel=1e-10)


def test_bilateral_is_exact_negation():
    seq = moments(RadialWeight.single_exp(1.0, 0.5), 16)
    for n in range(-17, 0):
        log_neg = extend_bilateral(seq, n).log_magnitude
        assert log_neg + seq[-n - 1].log_magnitude == 0.0  # bit-exact
    assert seq[-5].log_magnitude == -seq[4].log_magnitude


def test_bilateral_range_checks():
    seq = moments(RadialWeight.unit(), 4)
    with pytest.raises(DomainError):
        extend_bilateral(seq, -6)
    with pytest.raises(DomainError):
        extend_bilateral(seq, 0)


# -- tilde weight -------------------------------------------------------------


def test_tilde_weight_closed_form():
    w = RadialWeight.exp_exp(1.0, 1.0, 0.5)
    got = tilde_weight(w, 0.9)
    want = -(math.exp(10.0) - 100.0)  # log 1/tilde = e^10 - 100
    assert got.log_magnitude == pytest.approx(want, rel=1e-12)
    assert got.sign == 1


def test_tilde_weight_dominates_omega():
    w = RadialWeight.exp_exp(0.4, 0.28, 0.25)
    mesh_r = np.linspace(0.0, 0.999, 300)
    log_omega = w.log_omega_at(mesh_r)
    for r, lo in zip(mesh_r, log_omega):
        assert tilde_weight(w, float(r)).log_magnitude >= lo


def test_tilde_weight_precondition():
    w = RadialWeight.single_exp(1.0, 0.5)
    with pytest.raises(DomainError):
        tilde_weight(w, 0.0)  # log 1/omega = 1 exactly, not > 1


def test_tilde_norm_does_not_shrink():
    # unweighted-function norm comparison on the shared radial mesh
    w = RadialWeight.exp_exp(0.4, 0.28, 0.25)
    mesh = w._mesh
    omega_vals = np.exp(w.log_omega_at(mesh.r))
    tilde_vals = np.array(
        [tilde_weight(w, float(r)).to_float() for r in mesh.r]
    )
    assert mesh.integrate(2.0 * mesh.r * tilde_vals) >= mesh.integrate(
        2.0 * mesh.r * omega_vals
    )


# -- growth condition ---------------------------------------------------------


def test_growth_condition_passes_for_double_exponential():
    w = RadialWeight.exp_exp(1.0, 1.0, 0.5)
    t = 1.0 - np.geomspace(0.9, 1e-6, 50)
    rep = check_growth_condition(w, t)
    assert rep.passed
    assert rep.threshold_index == 0  # s^0.5 e^x = e^(x/2), rising everywhere


def test_growth_condition_fails_for_single_exponential():
    # quantity x e^(-eps0 x) peaks at x = 1/eps0 and then falls
    for eps0 in [0.1, 0.3, 0.5, 0.7, 0.9]:
        w = RadialWeight.single_exp(1.0, eps0)
        t = 1.0 - np.geomspace(0.9, 1e-11, 60)
        rep = check_growth_condition(w, t)
        assert not rep.passed


def test_growth_condition_constant_quantity_fails():
    # beta == eps0 makes the quantity exactly constant; a limit of c is not inf
    w = RadialWeight.exp_exp(0.7, 0.3, 0.3)
    t = 1.0 - np.geomspace(0.5, 1e-8, 40)
    assert not check_growth_condition(w, t).passed


def test_growth_condition_grid_validation():
    w = RadialWeight.exp_exp(1.0, 1.0, 0.5)
    with pytest.raises(DomainError):
        check_growth_condition(w, np.array([0.1, 0.2]))
    with pytest.raises(DomainError):
        check_growth_condition(w, np.array([0.1, 0.2, 0.2, 0.3]))


# -- moment decay chain -------------------------------------------------------


def _decay_sequence(log_values):
    vals = {n: LogReal.from_log(v) for n, v in enumerate(log_values)}
    return MomentSequence(vals, len(log_values) - 1)


def test_moment_decay_pass_and_fail():
    n = np.arange(101, dtype=float)
    rep = check_moment_decay(_decay_sequence(-n), alpha=1.0)
    assert rep.passed and rep.worst_margin <= 0.0

    rep_poly = check_moment_decay(_decay_sequence(-np.log(n + 1.0)), alpha=1.0)
    assert not rep_poly.passed
    assert rep_poly.worst_margin > 0.0


def test_derived_weight_bound_matches_brute_force():
    alpha, x = 1.0, 0.9
    got = moment_decay_weight_bound(alpha, x, n_max=10_000).log_magnitude
    best = math.inf
    for n in range(10_001):
        term = (
            math.log(n + 1.0)
            - n / math.log(n + 2.0) ** alpha
            - (2.0 * n + 2.0) * math.log(x)
        )
        best = min(best, term)
    assert got == best


def test_decay_bound_weight_passes_growth_condition():
    # the weight implied by the alpha = 1 decay law satisfies the growth
    # condition on a window where the minimizing n is interior
    alpha = 1.0
    s = np.geomspace(0.07, 0.04, 14)
    log_bound = np.array(
        [moment_decay_weight_bound(alpha, 1.0 - si, n_max=1_000_000).log_magnitude for si in s]
    )
    wide = moment_decay_weight_bound(alpha, 1.0 - s[-1], n_max=2_000_000).log_magnitude
    assert wide == pytest.approx(log_bound[-1], rel=1e-12)  # minimizer interior
    assert np.all(log_bound < -1.0)
    w = RadialWeight.sampled(s, log_bound, 0.5)
    rep = check_growth_condition(w, 1.0 - s)
    assert rep.passed


# -- delimited I/O ------------------------------------------------------------


def test_moments_csv_round_trip(tmp_path):
    seq = moments(RadialWeight.unit(), 12)
    path = tmp_path / "moments.csv"
    write_moments_csv(seq, str(path))
    raw = path.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode("utf-8").splitlines()
    assert lines[0] == "n,log_moment"
    assert len(lines) == 14
    for n, line in enumerate(lines[1:]):
        ns, val = line.split(",")
        assert int(ns) == n
        assert float(val) == seq[n].log_magnitude  # repr round-trips exactly


def test_sampled_weight_csv(tmp_path):
    ref = RadialWeight.exp_exp(0.4, 0.28, 0.25)
    s = np.geomspace(0.9, 1e-5, 30)
    theta = np.exp(np.asarray(ref.lambda_at(-np.log(s))))
    path = tmp_path / "weight.csv"
    body = "one_minus_t,log_one_over_omega\n" + "".join(
        f"{repr(float(si))},{repr(float(th))}\n" for si, th in zip(s, theta)
    )
    path.write_text(body, encoding="utf-8")
    w = read_sampled_weight_csv(str(path), 0.25)
    s_knot = float(s[11])
    assert theta_big(w, s_knot).log_magnitude == pytest.approx(
        theta_big(ref, s_knot).log_magnitude, rel=1e-12
    )
    assert theta_big(w, 0.003).log_magnitude == pytest.approx(
        theta_big(ref, 0.003).log_magnitude, rel=5e-3
    )

    bad = tmp_path / "bad.csv"
    bad.write_text("radius,log_omega\n0.5,-3.0\n", encoding="utf-8")
    with pytest.raises(DomainError):
        read_sampled_weight_csv(str(bad), 0.25)
