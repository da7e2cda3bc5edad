import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from adaptfunc.errors import ConstructionError, ContractError, SampleSizeError
from adaptfunc.lowerbound import (
    BumpFunction,
    HypothesisPrior,
    RiskBoundInputs,
    bound_exponent,
    build_priors,
    chi2_bound,
    chi2_mixture_bruteforce,
    chi2_mixture_enumerate,
    compute_ingredients,
    constrained_risk_rhs,
    functional_quadrature,
    functional_value,
    sample_from_prior,
    smallest_C,
    without_perturbation,
)

TREAT = dict(alpha=2.0, beta=2.5, prime=2.0)


def test_step_bump_normalization():
    H = BumpFunction("step", 1)
    pts, w = H.cube_rule()
    vals = H(pts)
    assert math.fsum(vals * w) == 0.0
    assert math.fsum(vals**2 * w) == pytest.approx(1.0, abs=1e-15)


def test_smooth_bump_normalization():
    for d in (1, 2):
        H = BumpFunction("smooth", d)
        pts, w = H.cube_rule()
        v = H(pts)
        assert abs(math.fsum(v * w)) < 1e-12
        assert abs(math.fsum(v**2 * w) - 1.0) < 1e-8


def test_corners_k4():
    P, _ = build_priors("treatment", k=4, **TREAT)
    assert np.allclose(P.corners[:, 0], [0, 0.25, 0.5, 0.75])
    assert P.side == 0.125


def test_perfect_power_required():
    with pytest.raises(ContractError):
        build_priors("treatment", d=2, k=8, **TREAT)


def test_theta0_structure_treatment():
    P, _ = build_priors("treatment", k=4, **TREAT)
    S = np.linspace(-1.4, 1.4, 9)
    f = P.fields(S)
    assert np.all(f["b"] == 0.5) and np.all(f["c"] == 0.0)


def test_theta0_structure_missing():
    P, _ = build_priors("missing", k=4, **TREAT)
    f = P.fields(np.linspace(-1.4, 1.4, 9))
    assert np.all(f["b"] == 0.5) and np.all(f["g"] == 0.5)
    assert np.allclose(f["a"].mean(), 2.0)


def test_functional_closed_forms_arithmetic():
    d = 16**-0.25
    t1 = HypothesisPrior("treatment", 1, 16, 1, d, d, (0.25, 0.25), "lt")
    m1 = HypothesisPrior("missing", 1, 16, 1, d, d, (0.25, 0.25), "lt")
    assert functional_value(t1) == 0.5
    assert functional_value(m1) == 0.625
    t0 = HypothesisPrior("treatment", 0, 16, 1, d, 0.0, (0.25, 0.25))
    assert functional_value(t0) == 0.25


def test_step_amplitude_infeasible_at_quarter_exponents():
    # the step bump has sup 2^(d/2), so k = 16 at exponents 1/4 leaves (0, 1)
    with pytest.raises(ConstructionError):
        build_priors("treatment", 0.25, 0.3, 1, 16, prime=0.25)


def test_functional_values_match_quadrature():
    cases = [("treatment", 4, TREAT), ("missing", 2, TREAT), ("missing", 4, TREAT),
             ("quadratic", 2, dict(alpha=2.5, beta=2.5))]
    rng = np.random.default_rng(0)
    for problem, k, ex in cases:
        for P in build_priors(problem, k=k, **ex):
            lam = rng.choice([-1.0, 1.0], size=k)
            assert abs(functional_quadrature(P, lam) - functional_value(P)) < 1e-12


def test_identical_arms_zero():
    P, _ = build_priors("treatment", k=4, **TREAT)
    ing = compute_ingredients(P, P)
    assert ing.d_bar == 0.0
    for n in (1, 2, 3, 4):
        assert chi2_mixture_bruteforce(P, P, n) == 0.0


def test_zero_amplitude_ingredients():
    P, _ = build_priors("treatment", k=4, **TREAT)
    flat = without_perturbation(P)
    ing = compute_ingredients(flat, flat)
    assert ing.a == 0.0 and ing.b == 0.0
    assert ing.c_tilde == pytest.approx(1.0, abs=1e-15)


def test_ingredients_dense_grid_oracle():
    P, Q = build_priors("treatment", k=8, **TREAT)
    ing = compute_ingredients(P, Q)
    m = P.m
    grid = (np.arange(4096) + 0.5) / 4096 * 0.5  # bump coordinates in [0, 1/2)
    H = np.where(grid < 0.25, math.sqrt(2.0), -math.sqrt(2.0))
    w = np.full(len(grid), 0.5 / len(grid) / m)

    def dens(prior, S):
        a = 0.5 + prior.da * S
        b = 0.5 + prior.db * S
        c = np.zeros_like(S) if prior.c_rule == "zero" else (0.5 - b) / (1 - a)
        m1, m0 = c * (1 - a) + b, b - c * a
        return np.stack([(1 - a) * (1 - m0), (1 - a) * m0, a * (1 - m1), a * m1])

    best = dict(a=0.0, c=0.0, d=0.0)
    pj = float(np.sum(w) * 1.0)
    for s in (1.0, -1.0):
        p = dens(P, s * H)
        q = dens(Q, s * H)
        pbar = 0.5 * (dens(P, H) + dens(P, -H))
        qbar = 0.5 * (dens(Q, H) + dens(Q, -H))
        best["a"] = max(best["a"], float(np.sum(w * (p - pbar) ** 2 / p)) / pj)
        best["c"] = max(best["c"], float(np.sum(w * pbar**2 / p)) / pj)
        best["d"] = max(best["d"], float(np.sum(w * (qbar - pbar) ** 2 / p)) / pj)
    assert abs(ing.a - best["a"]) < 1e-6
    assert abs(ing.b - best["a"]) < 1e-6
    assert abs(ing.c_tilde - max(best["c"], 1.0)) < 1e-6
    assert abs(ing.d_bar - best["d"]) < 1e-6
    assert np.allclose(ing.p, pj)


def test_bound_examples():
    P, _ = build_priors("treatment", k=4, **TREAT)
    flat = without_perturbation(P)
    ing0 = compute_ingredients(flat, flat)
    assert chi2_bound(ing0, 10, 1.0) == 0.0
    P, Q = build_priors("treatment", k=4, **TREAT)
    ing = compute_ingredients(P, P)
    assert bound_exponent(ing, 20) == pytest.approx(4 * bound_exponent(ing, 10), rel=1e-14)
    ing = compute_ingredients(P, Q)
    direct = math.expm1(50**2 * max(ing.p) * (ing.b**2 + ing.a * ing.b) + 50 * ing.d_bar)
    assert chi2_bound(ing, 50, 1.0) == pytest.approx(direct, rel=1e-14)
    assert chi2_bound(ing, 10**6, 1e6) == math.inf
    with pytest.raises(ContractError):
        chi2_bound(ing, 5, 0.0)


def test_bruteforce_matches_enumeration():
    for problem, k in (("missing", 2), ("quadratic", 2), ("quadratic", 3)):
        P, Q = build_priors(problem, k=k, alpha=2.0, beta=2.5, prime=2.0)
        for n in (1, 2, 3):
            assert chi2_mixture_bruteforce(P, Q, n) == pytest.approx(chi2_mixture_enumerate(P, Q, n),
                                                                     rel=1e-10, abs=1e-15)


def test_single_cube_closed_form():
    delta = 0.1
    P = HypothesisPrior("quadratic", 0, 1, 1, 0.0, 0.0, (1.0, 1.0))
    Q = HypothesisPrior("quadratic", 1, 1, 1, 0.0, delta, (1.0, 1.0))
    # one observation: densities are linear in the sign, so the mixtures agree
    assert chi2_mixture_bruteforce(P, Q, 1) == pytest.approx(0.0, abs=1e-15)
    # two observations in the cube: (1/64) (t1 t2)^2 summed over 16 atom pairs, |t| = 2 sqrt(2) delta
    assert chi2_mixture_bruteforce(P, Q, 2) == pytest.approx(16 * delta**4, rel=1e-12)


def test_bruteforce_limits():
    P, Q = build_priors("quadratic", alpha=2.5, beta=2.5, k=9)
    with pytest.raises(SampleSizeError):
        chi2_mixture_bruteforce(P, Q, 2)
    P, Q = build_priors("quadratic", alpha=2.5, beta=2.5, k=2)
    with pytest.raises(SampleSizeError):
        chi2_mixture_bruteforce(P, Q, 7)


def test_bruteforce_dominated_by_bound():
    P, Q = build_priors("treatment", k=4, **TREAT)
    ing = compute_ingredients(P, Q)
    C0 = max(smallest_C(chi2_mixture_bruteforce(P, Q, n), ing, n) for n in (1, 2, 3, 4))
    assert math.isfinite(C0)
    for n in (1, 2, 3, 4):
        assert chi2_mixture_bruteforce(P, Q, n) <= chi2_bound(ing, n, C0) * (1 + 1e-12)


def test_risk_rhs_cases():
    assert constrained_risk_rhs(RiskBoundInputs(0.0, 0.1, 0.0, 0.0, 0.0)) == 0.1
    assert constrained_risk_rhs(RiskBoundInputs(0.0, 0.1, 0.0, 0.5, 1e6)) < 0
    d = 16**-0.25
    mu0 = functional_value(HypothesisPrior("treatment", 0, 16, 1, d, 0.0, (0.25, 0.25)))
    mu1 = functional_value(HypothesisPrior("treatment", 1, 16, 1, d, d, (0.25, 0.25), "lt"))
    assert constrained_risk_rhs(RiskBoundInputs(mu0, mu1, 0.0, 0.1, 2.0)) == pytest.approx(0.25 - 0.2, abs=1e-15)


def test_risk_inputs_nonnegative():
    with pytest.raises(ContractError):
        RiskBoundInputs(0, 0, -1.0, 0, 0)


def test_sample_treatment_theta0_mean():
    (P,) = [p for p in build_priors("treatment", k=4, arms=(0,), **TREAT) if p is not None]
    D = sample_from_prior(P, 100_000, 3)
    se = math.sqrt(0.25 / 100_000)
    assert abs(D.a.mean() - 0.5) <= 3 * se


def test_sample_missing_theta0_response_rate():
    P, _ = build_priors("missing", k=4, **TREAT)
    D = sample_from_prior(P, 100_000, 5)
    # P(A = 1) = int (1/a) (a/2) over [0,1] by midpoint quadrature
    x = (np.arange(2**16) + 0.5) / 2**16
    a = P.fields(P.signed_sum(x[:, None], np.ones(P.k)))["a"]
    target = float(np.mean(1.0 / a * a / 2.0)) * 2.0 / float(np.mean(a))
    se = math.sqrt(target * (1 - target) / 100_000)
    assert abs(D.a.mean() - target) <= 3 * se
    assert np.all(D.y[D.a == 0] == 0)


def test_sample_reproducible():
    P, _ = build_priors("treatment", k=4, **TREAT)
    a = sample_from_prior(P, 500, 9)
    b = sample_from_prior(P, 500, 9)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y) and np.array_equal(a.a, b.a)


def test_holder_certificate_of_prior():
    P, Q = build_priors("treatment", k=4, **TREAT)
    norms = Q.holder_norms()
    assert set(norms) == {"a", "b"}
    with pytest.raises(ConstructionError):
        build_priors("treatment", k=4, M=1e-3, **TREAT)


def test_exponent_rules():
    with pytest.raises(ContractError):
        build_priors("treatment", 1.0, 1.0, k=4)
    with pytest.raises(ContractError):
        build_priors("treatment", 1.0, 2.0, k=4, prime=2.5)


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=1, max_value=4), st.sampled_from([2, 3, 4]), st.floats(2.0, 4.0))
def test_bruteforce_nonnegative_and_small_for_close_arms(n, k, beta):
    P, Q = build_priors("quadratic", alpha=beta, beta=beta, k=k)
    v = chi2_mixture_bruteforce(P, Q, n)
    assert v >= 0.0
    assert chi2_mixture_bruteforce(P, P, n) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=1, max_value=2**31 - 1), st.sampled_from([2, 4]))
def test_mean_zero_perturbation(seed, k):
    P, Q = build_priors("treatment", k=k if k == 4 else 4, **TREAT)
    lam = np.random.default_rng(seed).choice([-1.0, 1.0], size=P.k)
    x = (np.arange(2**12) + 0.5) / 2**12
    a = Q.fields(Q.signed_sum(x[:, None], lam))["a"]
    assert abs(a.mean() - 0.5) < 1e-14
