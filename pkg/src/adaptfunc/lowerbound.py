"""Two-arm bump priors, chi-square ingredients, and the constrained-risk bound.

Each arm is a uniform mixture over sign patterns ``lam`` in {-1, +1}^k of
models whose nuisance functions are a baseline plus ``amp * sum_j lam_j
H((x - x_j) k^(1/d))``.  The cubes ``x_j + k^(-1/d) [0, 1/2]^d`` sit at the
corners of the regular ``m^d`` lattice, ``m = k^(1/d)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy import integrate

from .errors import ConstructionError, ContractError, SampleSizeError
from .ustat import Dataset
from .wavelets import haar, holder_coeff_norm, project


# ----------------------------------------------------------------------------
# bump
# ----------------------------------------------------------------------------


def _mollifier(t):
    t = np.asarray(t, dtype=float)
    inside = (t > 0) & (t < 0.5)
    safe = np.where(inside, t * (0.5 - t), 1.0)
    return np.where(inside, np.exp(-1.0 / safe), 0.0)


@dataclass(frozen=True)
class BumpFunction:
    """Unit bump on ``[0, 1/2]^d`` with zero mean and unit square integral.

    The step kind is ``+2^(d/2)`` where the first coordinate is below 1/4
    and ``-2^(d/2)`` on the other half.  The smooth kind is
    ``C (u_1 - 1/4) m(u_1) prod_{i>1} m(u_i)`` with the standard
    ``exp(-1/(t(1/2 - t)))`` mollifier ``m``.
    """

    kind: str = "step"
    d: int = 1

    def __post_init__(self):
        if self.kind not in ("step", "smooth"):
            raise ContractError(f"unknown bump kind {self.kind!r}")
        if self.d < 1:
            raise ContractError("dimension must be >= 1")

    @cached_property
    def _scale(self):
        if self.kind == "step":
            return 2.0 ** (self.d / 2.0)
        opts = dict(epsabs=0.0, epsrel=1e-13, limit=200)
        i1 = integrate.quad(lambda t: ((t - 0.25) * _mollifier(t)) ** 2, 0.0, 0.5, **opts)[0]
        i0 = integrate.quad(lambda t: _mollifier(t) ** 2, 0.0, 0.5, **opts)[0]
        return 1.0 / math.sqrt(i1 * i0 ** (self.d - 1))

    @property
    def sup(self):
        """``max |H|``."""
        if self.kind == "step":
            return self._scale
        t = np.linspace(0.0, 0.5, 20001)
        h1 = np.max(np.abs((t - 0.25) * _mollifier(t)))
        return self._scale * h1 * float(np.max(_mollifier(t))) ** (self.d - 1)

    def __call__(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        inside = np.all((u >= 0.0) & (u < 0.5), axis=1)
        if self.kind == "step":
            val = np.where(u[:, 0] < 0.25, self._scale, -self._scale)
        else:
            val = self._scale * (u[:, 0] - 0.25) * _mollifier(u[:, 0])
            for i in range(1, u.shape[1]):
                val = val * _mollifier(u[:, i])
        return np.where(inside, val, 0.0)

    def cube_rule(self, nodes=None):
        """Quadrature on ``[0, 1/2]^d`` in bump coordinates.

        Exact for the step kind (one node per half); Gauss-Legendre tensor
        rule otherwise.  Weights sum to ``2^(-d)``.
        """
        d = self.d
        if self.kind == "step":
            pts = np.full((2, d), 0.25)
            pts[:, 0] = [0.125, 0.375]
            return pts, np.full(2, 0.5 * 2.0**-d)
        q = nodes or 64
        t, w = np.polynomial.legendre.leggauss(q)
        t = 0.25 * (t + 1.0)
        w = 0.25 * w
        grids = np.meshgrid(*([t] * d), indexing="ij")
        wgrids = np.meshgrid(*([w] * d), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=1)
        wts = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
        return pts, wts


# ----------------------------------------------------------------------------
# priors
# ----------------------------------------------------------------------------

OUTCOMES = {
    "treatment": ("A0Y0", "A0Y1", "A1Y0", "A1Y1"),
    "missing": ("A0", "A1Y0", "A1Y1"),
    "quadratic": ("Y0", "Y1"),
}

BASELINE_A = {"treatment": 0.5, "missing": 2.0, "quadratic": 0.5}


def _lattice_side(k, d):
    m = int(round(k ** (1.0 / d)))
    for cand in (m - 1, m, m + 1):
        if cand >= 1 and cand**d == k:
            return cand
    raise ContractError(f"k={k} is not a perfect {d}-th power")


@dataclass(frozen=True)
class HypothesisPrior:
    """One arm: fixed amplitudes, uniform law over sign patterns.

    ``da`` and ``db`` are the applied amplitudes of the ``a`` and ``b``
    perturbations (zero when that function sits at its baseline);
    ``c_rule`` selects how ``c`` follows from ``a`` and ``b`` (treatment).
    """

    problem: str
    arm: int
    k: int
    d: int
    da: float
    db: float
    exponents: tuple
    c_rule: str = "zero"
    case: str = "lt"
    M: float | None = None
    bump: BumpFunction = field(default_factory=BumpFunction)

    @property
    def m(self):
        return _lattice_side(self.k, self.d)

    @property
    def side(self):
        return 0.5 / self.m

    @property
    def corners(self):
        m, d = self.m, self.d
        cells = np.array(list(itertools.product(range(m), repeat=d)), dtype=float)
        return cells / m

    @property
    def outcomes(self):
        return OUTCOMES[self.problem]

    # --- function evaluation -------------------------------------------------

    def signed_sum(self, x, lam):
        """``sum_j lam_j H((x - x_j) m)`` at the rows of ``x``."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        m = self.m
        cell = np.minimum(np.floor(x * m).astype(np.int64), m - 1)
        u = x * m - cell
        j = np.ravel_multi_index(tuple(cell.T), (m,) * self.d)
        lam = np.asarray(lam, dtype=float)
        return lam[j] * self.bump(u)

    def fields(self, S):
        """Nuisance values given the unscaled signed bump sum ``S``."""
        S = np.asarray(S, dtype=float)
        if self.problem == "quadratic":
            return {"b": 0.5 + self.db * S}
        a = BASELINE_A[self.problem] + self.da * S
        b = 0.5 + self.db * S
        out = {"a": a, "b": b}
        if self.problem == "treatment":
            if self.c_rule == "zero":
                c = np.zeros_like(S)
            elif self.c_rule == "lt":
                c = (0.5 - b) / (1.0 - a)
            else:
                c = (0.5 - a) * b / (a * (1.0 - a))
            out["c"] = c
        else:
            out["g"] = np.full_like(S, 0.5)
        return out

    def conditionals(self, S):
        """Conditional probabilities that must lie in (0, 1)."""
        f = self.fields(S)
        if self.problem == "treatment":
            a, b, c = f["a"], f["b"], f["c"]
            return {"a": a, "E(Y|A=1)": c * (1 - a) + b, "E(Y|A=0)": b - c * a}
        if self.problem == "missing":
            return {"1/a": 1.0 / f["a"], "b": f["b"]}
        return {"b": f["b"]}

    def outcome_density(self, S):
        """Joint density of (outcome, x) per outcome column, shape (len(S), n_out)."""
        f = self.fields(S)
        if self.problem == "treatment":
            a, b, c = f["a"], f["b"], f["c"]
            m1 = c * (1 - a) + b
            m0 = b - c * a
            return np.stack([(1 - a) * (1 - m0), (1 - a) * m0, a * (1 - m1), a * m1], axis=1)
        if self.problem == "missing":
            a, b = f["a"], f["b"]
            return np.stack([(a - 1) / 2, (1 - b) / 2, b / 2], axis=1)
        b = f["b"]
        return np.stack([1 - b, b], axis=1)

    def density(self, x, lam):
        return self.outcome_density(self.signed_sum(x, lam))

    # --- checks ---------------------------------------------------------------

    def validate(self):
        h = self.bump.sup
        # values the signed bump sum actually takes
        S = np.array([-h, 0.0, h]) if self.bump.kind == "step" else np.linspace(-h, h, 401)
        worst = -math.inf
        where = None
        for name, v in self.conditionals(S).items():
            viol = np.maximum(0.0 - v, v - 1.0)
            i = int(np.argmax(viol))
            if viol[i] >= worst:
                worst, where = float(viol[i]), (name, float(v[i]))
        if worst >= 0.0:
            raise ConstructionError(
                f"{self.problem} arm {self.arm}, k={self.k}: {where[0]} = {where[1]:.6g} leaves (0, 1) "
                f"(max violation {worst:.6g})"
            )
        return self

    def holder_norms(self, level=None):
        """Hölder coefficient norms of the perturbed functions (all-plus signs), Haar basis."""
        fam = haar()
        j = level if level is not None else int(math.ceil(math.log2(self.m))) + 2
        lam = np.ones(self.k)
        out = {}
        names = [("b", 1)] if self.problem == "quadratic" else [("a", 0), ("b", 1)]
        for name, pos in names:
            def h(x, name=name):
                return self.fields(self.signed_sum(x, lam))[name]

            rep = project(fam, j, h, self.d)
            out[name] = holder_coeff_norm(rep, self.exponents[pos])
        return out

    def functional_value(self):
        return functional_value(self)


def _exponents(alpha, beta, prime):
    if alpha < beta:
        eb = alpha if prime is None else prime
        if not alpha <= eb < beta:
            raise ContractError("need alpha <= beta' < beta")
        return (alpha, eb), "lt"
    if alpha > beta:
        ea = beta if prime is None else prime
        if not beta <= ea < alpha:
            raise ContractError("need beta <= alpha' < alpha")
        return (ea, beta), "gt"
    if prime is None or not prime < beta:
        raise ContractError("alpha == beta needs an explicit alpha' < beta")
    return (prime, beta), "eq"


def build_priors(problem, alpha, beta, d=1, k=4, M=None, bump_kind="step", prime=None, arms=(0, 1)):
    """Return ``(theta0, theta1)`` for the given problem.

    ``prime`` is the auxiliary exponent (``beta'`` when ``alpha < beta``,
    ``alpha'`` otherwise).  For the quadratic problem only ``beta`` is used.
    Arms not listed in ``arms`` are returned as None without validation.
    """
    if problem not in OUTCOMES:
        raise ContractError(f"unknown problem {problem!r}")
    if k < 1:
        raise ContractError("k must be >= 1")
    _lattice_side(k, d)
    bump = BumpFunction(bump_kind, d)
    if problem == "quadratic":
        db = k ** (-beta / d)
        amps = [dict(da=0.0, db=0.0), dict(da=0.0, db=db)]
        exps, case, rules = (beta, beta), "lt", ("zero", "zero")
    else:
        exps, case = _exponents(alpha, beta, prime)
        da, db = (k ** (-e / d) for e in exps)
        if case == "gt":
            amps = [dict(da=0.0, db=db), dict(da=da, db=db)]
        else:
            amps = [dict(da=da, db=0.0), dict(da=da, db=db)]
        rules = ("zero", "gt" if case == "gt" else "lt")
    out = []
    for arm, (amp, rule) in enumerate(zip(amps, rules)):
        if arm not in arms:
            out.append(None)
            continue
        p = HypothesisPrior(problem, arm, k, d, amp["da"], amp["db"], exps, rule, case, M, bump)
        p.validate()
        if M is not None:
            norms = p.holder_norms()
            over = {n: v for n, v in norms.items() if v > M}
            if over:
                raise ConstructionError(f"arm {arm}: Hölder norms {over} exceed M = {M}")
        out.append(p)
    return tuple(out)


def functional_value(prior):
    """Closed form, using ``int H = 0`` and ``int H^2 = 1`` on each cube."""
    if prior.problem == "treatment":
        return 0.25 + prior.da * prior.db
    if prior.problem == "missing":
        return 0.5 + 0.5 * prior.da * prior.db
    return 0.25 + prior.db**2


def functional_quadrature(prior, lam=None, cells_per_side=None):
    """The same functional integrated numerically for one sign pattern."""
    lam = np.ones(prior.k) if lam is None else np.asarray(lam, dtype=float)
    d = prior.d
    pts_u, wts_u = prior.bump.cube_rule()
    # cube part plus the baseline remainder
    total = 0.0
    base = prior.fields(np.zeros(1))
    if prior.problem == "treatment":
        integrand = lambda f: f["a"] * f["b"]
    elif prior.problem == "missing":
        integrand = lambda f: f["b"] * f["a"] / 2.0  # X has density a/2
    else:
        integrand = lambda f: f["b"] ** 2
    vol = (1.0 / prior.m) ** d
    parts = []
    for corner in prior.corners:
        x = corner + pts_u / prior.m
        S = prior.signed_sum(x, lam)
        parts.append(integrand(prior.fields(S)) * wts_u * vol)
    cube_vol = prior.k * (prior.side**d)
    total = math.fsum(np.concatenate(parts))
    total += float(integrand(base)[0]) * (1.0 - cube_vol)
    return total


# ----------------------------------------------------------------------------
# divergence ingredients
# ----------------------------------------------------------------------------


@dataclass
class DivergenceIngredients:
    p: np.ndarray
    p_remainder: float
    a: float
    b: float
    c_tilde: float
    d_bar: float
    b_alt: float
    B_lower: float
    B_upper: float
    per_cell: list = field(default_factory=list)

    def A_needed(self, n):
        """Smallest ``A`` with ``n p_j (1 v a v b v c~) <= A``."""
        return float(n * np.max(self.p) * max(1.0, self.a, self.b, self.c_tilde))

    def to_dict(self):
        return {
            "p": [float(v) for v in self.p],
            "p_remainder": self.p_remainder,
            "a": self.a,
            "b": self.b,
            "b_alt": self.b_alt,
            "c_tilde": self.c_tilde,
            "d_bar": self.d_bar,
            "B_lower": self.B_lower,
            "B_upper": self.B_upper,
        }


def _cell_terms(p_pm, q_pm, w):
    """Ingredient integrals for one cell given densities under ``lam_j = +1, -1``.

    ``p_pm``/``q_pm`` have shape (2, Q, n_out); ``w`` holds the quadrature
    weights (Q,).
    """
    if not (np.all(np.isfinite(p_pm)) and np.all(p_pm > 0)):
        raise ConstructionError("density is zero or non-finite inside a cell")
    pbar = p_pm.mean(axis=0)
    qbar = q_pm.mean(axis=0)
    W = w[:, None]
    pj = [float(np.sum(W * p_pm[s])) for s in range(2)] + [float(np.sum(W * q_pm[s])) for s in range(2)]
    p_j = pj[0]
    if max(abs(v - p_j) for v in pj) > 1e-9 * max(p_j, 1e-300):
        raise ConstructionError(f"cell masses differ across signs or arms: {pj}")

    def sup(fn):
        return max(float(np.sum(W * fn(s))) for s in range(2)) / p_j

    return {
        "p_j": p_j,
        "a": sup(lambda s: (p_pm[s] - pbar) ** 2 / p_pm[s]),
        "b": sup(lambda s: (p_pm[s] - pbar) ** 2 / p_pm[s]),
        "b_alt": sup(lambda s: (q_pm[s] - p_pm[s]) ** 2 / p_pm[s]),
        "c_tilde": sup(lambda s: pbar**2 / p_pm[s]),
        "d_bar": sup(lambda s: (qbar - pbar) ** 2 / p_pm[s]),
        "min": float(np.min(p_pm)),
        "max": float(np.max(p_pm)),
    }


def _check_pair(P, Q):
    if (P.problem, P.k, P.d, P.bump) != (Q.problem, Q.k, Q.d, Q.bump):
        raise ContractError("arms must share problem, k, d and bump")


def compute_ingredients(P, Q, nodes=None):
    """Suprema over the cube cells plus the baseline remainder.

    The cells are (outcome space) x (cube); the remainder cell is
    (outcome space) x (complement of the cubes), where both arms sit at
    the baseline and contribute ``a = b = d = 0``, ``c~ = 1``.
    """
    _check_pair(P, Q)
    pts_u, wts_u = P.bump.cube_rule(nodes)
    vol = (1.0 / P.m) ** P.d
    w = wts_u * vol
    cells = []
    for j, corner in enumerate(P.corners):
        x = corner + pts_u / P.m
        dens_p, dens_q = [], []
        for s in (1.0, -1.0):
            lam = np.zeros(P.k)
            lam[j] = s
            dens_p.append(P.density(x, lam))
            dens_q.append(Q.density(x, lam))
        cells.append(_cell_terms(np.array(dens_p), np.array(dens_q), w))
    rem_vol = 1.0 - P.k * P.side**P.d
    base_p = P.outcome_density(np.zeros(1))
    base_q = Q.outcome_density(np.zeros(1))
    p_rem = float(np.sum(base_p)) * rem_vol
    if rem_vol > 0:
        rem = _cell_terms(np.array([base_p, base_p]), np.array([base_q, base_q]), np.array([rem_vol]))
    else:  # pragma: no cover - cubes never fill the cube
        rem = {"a": 0.0, "b": 0.0, "b_alt": 0.0, "c_tilde": 1.0, "d_bar": 0.0, "min": 1.0, "max": 1.0}
    allc = cells + [rem]
    return DivergenceIngredients(
        p=np.array([c["p_j"] for c in cells]),
        p_remainder=p_rem,
        a=max(c["a"] for c in allc),
        b=max(c["b"] for c in allc),
        c_tilde=max(c["c_tilde"] for c in allc),
        d_bar=max(c["d_bar"] for c in allc),
        b_alt=max(c["b_alt"] for c in allc),
        B_lower=min(c["min"] for c in allc),
        B_upper=max(c["max"] for c in allc),
        per_cell=cells,
    )


def chi2_bound(ing, n, C):
    """``exp(C n^2 max_j p_j (b^2 + a b) + C n d) - 1``; ``inf`` on overflow."""
    if not C > 0:
        raise ContractError("C must be positive")
    if n < 1:
        raise ContractError("n must be >= 1")
    expo = C * n * n * float(np.max(ing.p)) * (ing.b**2 + ing.a * ing.b) + C * n * ing.d_bar
    if expo > 709.0:
        return math.inf
    return math.expm1(expo)


def bound_exponent(ing, n):
    """The exponent of ``chi2_bound`` per unit ``C``."""
    return n * n * float(np.max(ing.p)) * (ing.b**2 + ing.a * ing.b) + n * ing.d_bar


def _atoms(prior, corner, s):
    """Masses of the (half-cube, outcome) atoms of one cube for ``lam_j = s``."""
    pts_u, wts_u = prior.bump.cube_rule()
    x = corner + pts_u / prior.m
    lam = np.zeros(prior.k)
    j = int(np.ravel_multi_index(tuple(np.round(corner * prior.m).astype(int)), (prior.m,) * prior.d))
    lam[j] = s
    vol = (1.0 / prior.m) ** prior.d
    return (prior.density(x, lam) * (wts_u * vol)[:, None]).ravel()


def _cell_excess(Pp, Pm, Qp, Qm, n):
    """``G(m) - p_j^m`` for m = 0..n, where ``G(m) = sum_seq qbar^2 / pbar``."""
    out = np.zeros(n + 1)
    size = len(Pp)
    for mm in range(1, n + 1):
        seqs = np.array(list(itertools.product(range(size), repeat=mm)))
        pp = np.prod(Pp[seqs], axis=1)
        pm = np.prod(Pm[seqs], axis=1)
        qp = np.prod(Qp[seqs], axis=1)
        qm = np.prod(Qm[seqs], axis=1)
        pbar = 0.5 * (pp + pm)
        qbar = 0.5 * (qp + qm)
        out[mm] = math.fsum((qbar - pbar) * (qbar + pbar) / pbar)
    return out


def _egf(coef):
    return np.array([c / math.factorial(i) for i, c in enumerate(coef)])


def _mul(a, b, n):
    return np.convolve(a, b)[: n + 1]


def chi2_mixture_bruteforce(P, Q, n):
    """Exact chi-square divergence between the two n-fold mixture laws.

    Uses the factorisation over cubes: with ``G_j(m)`` the sum over
    within-cube atom sequences of length ``m`` of ``qbar^2 / pbar``, the
    divergence plus one is ``n! [t^n] prod_j sum_m G_j(m) t^m / m!``.
    The computation runs on the excess ``G_j(m) - p_j^m`` so identical arms
    give exactly 0.
    """
    _check_pair(P, Q)
    if P.bump.kind != "step":
        raise ContractError("brute-force divergence needs the step bump")
    if n > 6 or P.k > 8:
        raise SampleSizeError(f"brute force limited to n <= 6 and k <= 8 (got n={n}, k={P.k})")
    if n < 1:
        raise ContractError("n must be >= 1")
    base = []
    excess = []
    for corner in P.corners:
        Pp, Pm = _atoms(P, corner, 1.0), _atoms(P, corner, -1.0)
        Qp, Qm = _atoms(Q, corner, 1.0), _atoms(Q, corner, -1.0)
        if np.any(Pp <= 0) or np.any(Pm <= 0):
            raise ConstructionError("atom with zero mass under the first arm")
        pj = math.fsum(Pp)
        base.append(_egf([pj**i for i in range(n + 1)]))
        excess.append(_egf(_cell_excess(Pp, Pm, Qp, Qm, n)))
    rem_vol = 1.0 - P.k * P.side**P.d
    bp = P.outcome_density(np.zeros(1))[0] * rem_vol
    bq = Q.outcome_density(np.zeros(1))[0] * rem_vol
    pr = math.fsum(bp)
    dr = math.fsum((bq - bp) * (bq + bp) / bp)
    r = pr + dr
    base.append(_egf([pr**i for i in range(n + 1)]))
    excess.append(_egf([r**i - pr**i if dr != 0 else 0.0 for i in range(n + 1)]))
    # R tracks prod(E + D) - prod(E); every term carries at least one D
    E = np.zeros(n + 1)
    E[0] = 1.0
    R = np.zeros(n + 1)
    for e, dlt in zip(base, excess):
        R = _mul(R, e + dlt, n) + _mul(E, dlt, n)
        E = _mul(E, e, n)
    # nonnegative by definition; clip rounding residue around an exact zero
    return max(float(math.factorial(n) * R[n]), 0.0)


def chi2_mixture_enumerate(P, Q, n):
    """Direct enumeration over samples and sign patterns (tiny cases only)."""
    _check_pair(P, Q)
    if n > 3 or P.k > 3:
        raise SampleSizeError("enumeration limited to n <= 3 and k <= 3")
    atoms_p, atoms_q = {}, {}
    for lam in itertools.product((1.0, -1.0), repeat=P.k):
        lam = np.array(lam)
        mp, mq = [], []
        for corner in P.corners:
            pts_u, wts_u = P.bump.cube_rule()
            x = corner + pts_u / P.m
            vol = (1.0 / P.m) ** P.d
            mp.append((P.density(x, lam) * (wts_u * vol)[:, None]).ravel())
            mq.append((Q.density(x, lam) * (wts_u * vol)[:, None]).ravel())
        rem_vol = 1.0 - P.k * P.side**P.d
        mp.append(P.outcome_density(np.zeros(1))[0] * rem_vol)
        mq.append(Q.outcome_density(np.zeros(1))[0] * rem_vol)
        atoms_p[tuple(lam)] = np.concatenate(mp)
        atoms_q[tuple(lam)] = np.concatenate(mq)
    size = len(next(iter(atoms_p.values())))
    total = []
    for seq in itertools.product(range(size), repeat=n):
        seq = list(seq)
        pbar = np.mean([np.prod(v[seq]) for v in atoms_p.values()])
        qbar = np.mean([np.prod(v[seq]) for v in atoms_q.values()])
        total.append((qbar - pbar) ** 2 / pbar)
    return math.fsum(total)


def smallest_C(chi2, ing, n):
    """Smallest ``C`` with ``chi2 <= chi2_bound(ing, n, C)``."""
    e = bound_exponent(ing, n)
    if chi2 <= 0:
        return 0.0
    if e <= 0:
        return math.inf
    return math.log1p(chi2) / e


# ----------------------------------------------------------------------------
# constrained risk
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class RiskBoundInputs:
    mu0: float
    mu1: float
    sigma0: float
    eps: float
    chi: float

    def __post_init__(self):
        for name in ("sigma0", "eps", "chi"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be nonnegative")


def constrained_risk_rhs(inputs):
    """``|mu1 - mu0| - (eps + sigma0) chi``; may be negative (vacuous)."""
    return abs(inputs.mu1 - inputs.mu0) - (inputs.eps + inputs.sigma0) * inputs.chi


# ----------------------------------------------------------------------------
# sampling
# ----------------------------------------------------------------------------


def sample_from_prior(prior, n, rng, lam=None):
    """Draw a sign pattern (unless given) and then ``n`` observations."""
    rng = np.random.default_rng(rng)
    if lam is None:
        lam = rng.choice((-1.0, 1.0), size=prior.k)
    lam = np.asarray(lam, dtype=float)
    d = prior.d
    if prior.problem == "missing":
        # X has density a/2; rejection against the constant envelope
        top = (BASELINE_A["missing"] + prior.da * prior.bump.sup) / 2.0
        xs = []
        need = n
        while need > 0:
            cand = rng.random((max(2 * need, 64), d))
            acc = rng.random(len(cand)) * top < prior.fields(prior.signed_sum(cand, lam))["a"] / 2.0
            xs.append(cand[acc][:need])
            need -= len(xs[-1])
        x = np.concatenate(xs)
    else:
        x = rng.random((n, d))
    f = prior.fields(prior.signed_sum(x, lam))
    u1 = rng.random(n)
    u2 = rng.random(n)
    if prior.problem == "treatment":
        A = (u1 < f["a"]).astype(float)
        mean = f["c"] * (A - f["a"]) + f["b"]
        Y = (u2 < mean).astype(float)
        return Dataset(x, Y, A)
    if prior.problem == "missing":
        A = (u1 < 1.0 / f["a"]).astype(float)
        Y = (u2 < f["b"]).astype(float)
        return Dataset(x, Y * A, A)
    Y = (u2 < f["b"]).astype(float)
    return Dataset(x, Y)


def without_perturbation(prior):
    """Same arm with both amplitudes set to zero."""
    return replace(prior, da=0.0, db=0.0)
