import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptfunc.errors import BoundsError, ContractError
from adaptfunc.supnorm import (
    TruncationMap,
    build_window,
    calibrate_constant,
    density_adaptive,
    density_truncation,
    dyadic_grid,
    holder_certificate,
    regression_adaptive,
    regression_truncation,
    scaling_fit,
    sup_distance,
)
from adaptfunc.wavelets import coefficient_rep, haar

HAAR = haar()


def const(v):
    return lambda x: np.full(len(np.atleast_2d(x)), float(v))


def test_truncation_identity_inside():
    t = density_truncation(0.25, 2.0)
    x = np.linspace(0.25, 2.0, 101)
    assert np.array_equal(t(x), x)


def test_truncation_clamps():
    t = density_truncation(0.25, 2.0)
    assert t(6.0) <= 4.0
    assert t(0.0) >= 0.125


def test_truncation_needs_ordered_bounds():
    with pytest.raises(ContractError):
        TruncationMap(1.0, 0.5, 0.0, 2.0)


def test_sup_distance_examples():
    assert sup_distance(const(0.3), const(0.3), 6) == 0.0
    assert sup_distance(const(0.0), const(1.0), 6) == 1.0
    rng = np.random.default_rng(0)
    f = scaling_fit(HAAR, 3, rng.random((50, 1)), np.ones(50))
    g = scaling_fit(HAAR, 3, rng.random((50, 1)), np.ones(50))
    cells = (np.arange(8) + 0.5) / 8
    exact = np.max(np.abs(f(cells[:, None]) - g(cells[:, None])))
    assert sup_distance(f, g, 5) == exact


def test_window_levels_ordered():
    w = build_window(4000, 1, 0.5, 0.9)
    assert w.lo <= w.hi
    assert w.levels() == list(range(w.lo, w.hi + 1))


def test_uniform_density_fit_close():
    rng = np.random.default_rng(42)
    win = build_window(4000, 1, 0.5, 0.9)
    bad = 0
    for _ in range(100):
        f = density_adaptive(rng.random((4000, 1)), HAAR, win, 1.0, density_truncation(0.25, 2.0))
        bad += sup_distance(f, const(1.0), win.hi + 2) > 0.25
    assert bad <= 10


def test_density_output_range_on_concentrated_data():
    rng = np.random.default_rng(1)
    x = (rng.random((500, 1)) * 0.05) ** 2
    win = build_window(500, 1, 0.5, 0.9)
    f = density_adaptive(x, HAAR, win, 1.0, density_truncation(0.25, 2.0))
    v = f(dyadic_grid(12, 1))
    assert v.min() >= 0.125 and v.max() <= 4.0


def test_regression_constant_reconstructed_exactly():
    rng = np.random.default_rng(7)
    x = rng.random((1000, 1))
    win = build_window(1000, 1, 0.1, 0.9)
    # uniform design with exact g: empirical cell averages of W / g_hat times counts
    fit = regression_adaptive(x, np.full(1000, 0.7), const(1.0), HAAR, win, 1.0, regression_truncation(2.0))
    counts = np.bincount(np.minimum((x[:, 0] * 2**fit.level).astype(int), 2**fit.level - 1),
                         minlength=2**fit.level)
    expected = 0.7 * counts * 2**fit.level / 1000
    cells = (np.arange(2**fit.level) + 0.5) / 2**fit.level
    assert np.allclose(fit.raw(cells[:, None]), expected, atol=1e-13)


def test_regression_equispaced_constant_exact():
    x = ((np.arange(1024) + 0.5) / 1024)[:, None]
    win = build_window(1024, 1, 0.1, 0.9)
    fit = regression_adaptive(x, np.full(1024, 0.3), const(1.0), HAAR, win, 1.0, regression_truncation(2.0))
    assert np.allclose(fit(dyadic_grid(10, 1)), 0.3, atol=1e-14)


def test_regression_output_bound():
    rng = np.random.default_rng(3)
    x = rng.random((400, 1)) ** 4
    win = build_window(400, 1, 0.1, 0.9)
    fit = regression_adaptive(x, np.full(400, 2.0), const(1.0), HAAR, win, 1.0, regression_truncation(2.0))
    assert np.max(np.abs(fit(dyadic_grid(12, 1)))) <= 4.0


def test_regression_floor_violation():
    x = np.random.default_rng(0).random((100, 1))
    win = build_window(100, 1, 0.1, 0.9)
    with pytest.raises(BoundsError):
        regression_adaptive(x, np.ones(100), const(0.01), HAAR, win, 1.0, regression_truncation(2.0), g_floor=0.1)


def test_holder_certificate_cases():
    flat = coefficient_rep(HAAR, 1, {(0, (0,)): np.array([0.5])})
    assert holder_certificate(flat, 0.5, 1.0)
    spike = coefficient_rep(HAAR, 1, {(0, (0,)): np.zeros(1), (3, (1,)): np.array([0, 0, 1.0, 0, 0, 0, 0, 0])})
    assert not holder_certificate(spike, 0.5, 1.0)


def test_calibrate_constant_reps_guard():
    with pytest.raises(ContractError):
        calibrate_constant(lambda rng: (lambda C: False), 10, 0.9)


def test_identical_candidates_select_lowest():
    # one observation per cell at every window level: all candidates coincide with 1 on the grid at level lo
    win = build_window(4096, 1, 0.5, 0.9)
    x = ((np.arange(4096) + 0.5) / 4096)[:, None]
    f = density_adaptive(x, HAAR, win, 1.0, density_truncation(0.25, 2.0))
    assert f.level == win.lo


@settings(max_examples=200, deadline=None)
@given(st.floats(0.05, 1.0), st.floats(1.0, 5.0), st.floats(-20.0, 20.0))
def test_truncation_range_and_identity(lo, hi, x):
    t = density_truncation(lo, hi)
    y = float(t(x))
    assert lo / 2 <= y <= 2 * hi
    if lo <= x <= hi:
        assert y == x


@settings(max_examples=100, deadline=None)
@given(st.floats(0.1, 3.0), st.floats(-10, 10), st.floats(-10, 10))
def test_truncation_monotone_and_contractive(B, x1, x2):
    t = regression_truncation(B)
    lo, hi = sorted((x1, x2))
    y1, y2 = float(t(lo)), float(t(hi))
    assert y1 <= y2 + 1e-15
    assert y2 - y1 <= hi - lo + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=100, max_value=20_000), st.floats(0.1, 1.0), st.floats(0.0, 1.0))
def test_window_monotone_in_smoothness(n, s_min, gap):
    w = build_window(n, 1, s_min, min(s_min + gap, 2.0))
    assert w.lo <= w.hi
