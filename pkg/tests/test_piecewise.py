import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from berglab.errors import DomainError
from berglab.piecewise import PiecewiseLinear, lower_convex_hull


def test_eval_interpolates_and_extrapolates_with_end_slopes():
    f = PiecewiseLinear(np.array([0.0, 1.0, 3.0]), np.array([0.0, 2.0, 2.0]))
    assert f(0.5) == pytest.approx(1.0)
    assert f(2.0) == pytest.approx(2.0)
    # left of domain: slope 2; right of domain: slope 0
    assert f(-1.0) == pytest.approx(-2.0)
    assert f(10.0) == pytest.approx(2.0)


def test_vectorized_eval_matches_scalar():
    xs = np.array([0.0, 0.5, 1.25, 2.0])
    ys = np.array([1.0, -1.0, 0.5, 4.0])
    f = PiecewiseLinear(xs, ys)
    grid = np.linspace(-1.0, 3.0, 41)
    vec = f(grid)
    for g, v in zip(grid, vec):
        assert f(float(g)) == pytest.approx(v)


def test_slopes_and_side_slopes():
    f = PiecewiseLinear(np.array([0.0, 1.0, 2.0]), np.array([0.0, 1.0, 3.0]))
    assert f.slopes() == pytest.approx([1.0, 2.0])
    assert f.slope_left(1) == pytest.approx(1.0)
    assert f.slope_right(1) == pytest.approx(2.0)
    # end knots extend the nearest segment
    assert f.slope_left(0) == pytest.approx(1.0)
    assert f.slope_right(2) == pytest.approx(2.0)


def test_convexity_and_monotonicity_flags():
    xs = np.array([0.0, 1.0, 2.0])
    assert PiecewiseLinear(xs, np.array([0.0, 1.0, 3.0])).is_convex()
    assert not PiecewiseLinear(xs, np.array([0.0, 2.0, 3.0])).is_convex()
    assert PiecewiseLinear(xs, np.array([0.0, 2.0, 3.0])).is_convex(tol=1.1)
    assert PiecewiseLinear(xs, np.array([0.0, 1.0, 3.0])).is_nondecreasing()
    assert not PiecewiseLinear(xs, np.array([0.0, -1.0, 3.0])).is_nondecreasing()


def test_validation():
    with pytest.raises(DomainError):
        PiecewiseLinear(np.array([0.0, 0.0]), np.array([1.0, 2.0]))
    with pytest.raises(DomainError):
        PiecewiseLinear(np.array([0.0]), np.array([1.0]))
    with pytest.raises(DomainError):
        PiecewiseLinear(np.array([0.0, 1.0]), np.array([1.0, np.inf]))


def _brute_force_minorant_at_knots(xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Greatest convex minorant at each knot: minimum over all chords of
    point pairs that straddle the knot.  O(n^3) reference."""
    n = xs.size
    out = ys.copy()
    for i in range(n):
        best = ys[i]
        for j in range(0, i + 1):
            for k in range(i, n):
                if j == k:
                    continue
                t = (xs[i] - xs[j]) / (xs[k] - xs[j])
                best = min(best, ys[j] + t * (ys[k] - ys[j]))
        out[i] = best
    return out


class TestLowerConvexHull:
    def test_simple_vee(self):
        xs = np.array([0.0, 1.0, 2.0, 3.0])
        ys = np.array([3.0, 0.5, 2.9, 4.0])
        idx = lower_convex_hull(xs, ys)
        assert list(idx) == [0, 1, 3]

    def test_convex_input_keeps_every_vertex(self):
        xs = np.array([0.0, 1.0, 2.0, 3.0])
        ys = np.array([3.0, 0.5, 1.0, 4.0])  # slopes -2.5, 0.5, 3.0
        assert list(lower_convex_hull(xs, ys)) == [0, 1, 2, 3]

    def test_keeps_endpoints_and_stays_below(self):
        rng = np.random.default_rng(7)
        for _ in range(25):
            n = int(rng.integers(3, 40))
            xs = np.sort(rng.uniform(-5, 5, n))
            xs += np.arange(n) * 1e-6  # guarantee strict increase
            ys = rng.normal(size=n)
            idx = lower_convex_hull(xs, ys)
            assert idx[0] == 0 and idx[-1] == n - 1
            hull = PiecewiseLinear(xs[idx], ys[idx]) if idx.size >= 2 else None
            assert hull is not None
            assert hull.is_convex(tol=1e-9)
            vals = hull(xs)
            assert np.all(vals <= ys + 1e-9)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(min_value=0, max_value=10_000))
    def test_matches_brute_force_minorant(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(3, 25))
        xs = np.cumsum(rng.uniform(0.1, 1.0, n))
        ys = rng.normal(scale=3.0, size=n)
        idx = lower_convex_hull(xs, ys)
        hull = PiecewiseLinear(xs[idx], ys[idx])
        want = _brute_force_minorant_at_knots(xs, ys)
        assert hull(xs) == pytest.approx(want, abs=1e-9)
