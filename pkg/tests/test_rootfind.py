import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from berglab.errors import BracketError, DomainError
from berglab.rootfind import bisect_monotone


def test_solves_increasing_map():
    res = bisect_monotone(math.exp, -10.0, 10.0, target=5.0, tol=1e-12)
    assert res.converged
    assert res.x == pytest.approx(math.log(5.0), abs=1e-10)


def test_solves_decreasing_map():
    res = bisect_monotone(lambda x: -x**3, -4.0, 4.0, target=-8.0, tol=1e-12)
    assert res.converged
    assert res.x == pytest.approx(2.0, abs=1e-10)


def test_bracket_error_reports_endpoint_values():
    with pytest.raises(BracketError) as exc:
        bisect_monotone(math.exp, 0.0, 1.0, target=-1.0, tol=1e-9)
    msg = str(exc.value)
    assert "f(0.0)=1.0" in msg


def test_infinite_values_order_against_target():
    # log of a quantity that underflows on the left, overflows on the right
    def f(x):
        if x < 0.3:
            return -math.inf
        if x > 0.7:
            return math.inf
        return math.tan((x - 0.5) * math.pi / 0.4) * 5.0

    res = bisect_monotone(f, 0.0, 1.0, target=1.0, tol=1e-9)
    assert res.converged
    assert f(res.x) == pytest.approx(1.0, abs=1e-9)


def test_step_function_exhausts_interval_without_convergence():
    f = lambda x: 1.0 if x >= 0.31 else -1.0
    res = bisect_monotone(f, 0.0, 1.0, target=0.0, tol=1e-6)
    assert not res.converged
    assert res.x == pytest.approx(0.31, abs=1e-9)


def test_endpoint_exact_hit():
    res = bisect_monotone(lambda x: x, 2.0, 3.0, target=2.0, tol=0.0)
    assert res.converged and res.x == 2.0 and res.iterations == 0


def test_xtol_stops_early():
    calls = []

    def f(x):
        calls.append(x)
        return x

    bisect_monotone(f, 0.0, 1.0, target=0.123456, tol=0.0, xtol=1e-3)
    assert len(calls) < 15


def test_nan_rejected():
    with pytest.raises(DomainError):
        bisect_monotone(lambda x: math.nan, 0.0, 1.0, target=0.0, tol=1e-9)


@settings(max_examples=50, deadline=None)
@given(
    st.integers(min_value=0, max_value=10_000),
    st.floats(min_value=-5.0, max_value=5.0),
)
def test_matches_dense_grid_scan(seed, shift):
    """Oracle: on a random strictly monotone smooth map, bisection must land
    within one grid step of the argmin of |f - target| on a dense grid."""
    rng = np.random.default_rng(seed)
    a, b, c = rng.uniform(0.1, 2.0, 3)
    f = lambda x: a * x**3 + b * x + c * math.atan(x) + shift
    lo, hi = -3.0, 3.0
    target = f(rng.uniform(lo, hi))
    res = bisect_monotone(f, lo, hi, target=target, tol=1e-11)
    assert res.converged
    grid = np.linspace(lo, hi, 20_001)
    vals = np.abs(np.array([f(float(t)) for t in grid]) - target)
    x_grid = float(grid[int(np.argmin(vals))])
    assert abs(res.x - x_grid) <= (hi - lo) / 20_000 + 1e-9
