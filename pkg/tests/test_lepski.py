import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptfunc.errors import ContractError, GridError
from adaptfunc.lepski import (
    CANDIDATES,
    GridWarning,
    LepskiGrid,
    _entry,
    adaptive_estimate,
    build_grid,
    calibrate_copt,
    j_of,
    select_l,
)
from adaptfunc.ustat import Dataset, InfluenceTriple, constant, estimate_phi
from adaptfunc.wavelets import haar


def scan_oracle(est, grid, C):
    """Naive re-derivation of the admissible set."""
    logn = math.log(grid.n)
    ls = range(grid.s_star, grid.N)
    admissible = [
        l for l in ls
        if all((est[l] - est[m]) ** 2 <= C**2 * grid.entries[m].R * logn for m in ls if m >= l)
    ]
    return min(admissible)


def test_formula_grid_size_at_ten_thousand():
    grid = build_grid(10_000, 1, 1.5, "formula")
    cap = 10_000 ** (1 - 2 / math.log(math.log(10_000)))
    assert 1.5**2 <= cap < 1.5**3
    assert grid.N == 3


def test_beta_back_substitution():
    for n in (1000, 10_000):
        for mode in ("formula", "span"):
            grid = build_grid(n, 1, 1.5, mode)
            for e in grid.entries:
                assert abs(e.k - n ** (2 / (1 + 4 * e.beta))) <= 1e-12 * e.k


def test_k_star_at_quarter():
    # k(j) = n forces beta = d/4 and k_* = (n^2 / log n)^(1/2)
    n = 2**14
    e = _entry(0, 14, n, 1)
    assert e.beta == pytest.approx(0.25, abs=1e-15)
    assert e.k_star == pytest.approx((n**2 / math.log(n)) ** 0.5, rel=1e-14)
    ks = (10_000**2 / math.log(10_000)) ** 0.5
    assert ks == pytest.approx(3295.0, abs=0.5)
    assert ks / 10_000**2 == pytest.approx(3.295e-5, rel=1e-3)


def test_j_of():
    assert j_of(1, 1) == 0
    assert j_of(8, 1) == 3
    assert j_of(15, 2) == 1
    assert j_of(16, 2) == 2


def test_identical_candidates_select_s_star():
    grid = build_grid(2000, 1, 1.5, "span")
    est = {l: 0.3 for l in range(grid.N)}
    assert select_l(est, grid, 1.0)[0] == grid.s_star


def test_two_entry_witness():
    grid = LepskiGrid(1.5, 2, [_entry(0, 10, 1000, 1), _entry(1, 12, 1000, 1)], 0, 1000, 1, "span")
    thr = grid.entries[1].R * math.log(1000)
    l_hat, trace = select_l({0: 0.0, 1: 2 * math.sqrt(thr)}, grid, 1.0)
    assert l_hat == 1
    assert trace.witnesses[0] == 1


def test_select_requires_all_candidates():
    grid = build_grid(2000, 1, 1.5, "span")
    with pytest.raises(ContractError):
        select_l({grid.s_star: 0.0}, grid, 1.0)


def test_degenerate_formula_grid_warns():
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        grid = build_grid(100, 1, 1.5, "formula")
    assert grid.degenerate and grid.N == 1
    assert any(issubclass(x.category, GridWarning) for x in w)


def test_degenerate_single_entry_equals_fixed():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridWarning)
        grid = build_grid(100, 1, 1.5, "formula")
    rng = np.random.default_rng(0)
    D = Dataset(rng.random(100), rng.random(100))
    t = InfluenceTriple(lambda D: D.y, lambda D: D.y, lambda D: D.y, 10.0)
    val, _ = adaptive_estimate(D, t, haar(), grid, 1.0)
    assert val == estimate_phi(D, t, haar(), grid.entries[0].j_star).value


def test_small_n_grid_error():
    with pytest.raises(GridError):
        build_grid(8)


def test_adaptive_deterministic():
    rng = np.random.default_rng(4)
    D = Dataset(rng.random(500), (rng.random(500) < 0.5).astype(float))
    t = InfluenceTriple(lambda D: D.y, lambda D: D.y - 0.5, lambda D: D.y - 0.5, 10.0)
    grid = build_grid(500)
    assert adaptive_estimate(D, t, haar(), grid, 0.5)[0] == adaptive_estimate(D, t, haar(), grid, 0.5)[0]


def _null_model(n):
    fam = haar()
    t = InfluenceTriple(constant(0.0), lambda D: D.y - 0.5, lambda D: D.y - 0.5, 10.0)

    def model(rng):
        return Dataset(rng.random(n), (rng.random(n) < 0.5).astype(float)), t, fam

    return model


def test_calibration_quantile_zero_gives_smallest():
    grid = build_grid(200)
    cal = calibrate_copt(_null_model(200), grid, 50, 0.0, rng=1)
    assert cal.value == min(CANDIDATES)


def test_calibration_monotone_in_quantile():
    grid = build_grid(200)
    vals = [calibrate_copt(_null_model(200), grid, 60, q, rng=7).value for q in (0.5, 0.8, 0.95)]
    assert vals == sorted(vals)


def test_calibration_needs_reps():
    with pytest.raises(ContractError):
        calibrate_copt(_null_model(200), build_grid(200), 10, 0.9)


@settings(max_examples=100, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1), st.sampled_from([500, 2000, 10_000]),
       st.sampled_from(["formula", "span"]), st.floats(0.05, 4.0))
def test_select_matches_scan_oracle(seed, n, mode, C):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", GridWarning)
        grid = build_grid(n, 1, 1.5, mode)
    if grid.s_star >= grid.N:
        return
    rng = np.random.default_rng(seed)
    scale = math.sqrt(grid.entries[grid.s_star].R * math.log(n))
    est = {l: float(rng.normal(0, scale * 2)) for l in range(grid.s_star, grid.N)}
    assert select_l(est, grid, C)[0] == scan_oracle(est, grid, C)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=20, max_value=10**6), st.integers(min_value=1, max_value=3))
def test_grid_invariants(n, d):
    for mode in ("formula", "span"):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", GridWarning)
            try:
                grid = build_grid(n, d, 1.5, mode)
            except GridError:
                continue
        ks = [e.k for e in grid.entries]
        assert ks == sorted(ks)
        for e in grid.entries:
            assert abs(e.k - n ** (2 / (1 + 4 * e.beta / d))) <= 1e-9 * e.k
            assert e.R == pytest.approx(e.k_star / n**2, rel=1e-14)
