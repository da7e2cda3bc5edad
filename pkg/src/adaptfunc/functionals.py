"""Functional-estimation pipelines built on three-way sample splitting.

Block 3 gives the design density, block 2 the regression nuisances, and
block 1 the second-order estimate, whose resolution is chosen by the Lepski
rule.  Nuisance estimates are smoothly truncated so that every influence
function stays bounded.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .errors import BoundsError, ContractError, SampleSizeError
from .lepski import build_grid, select_l
from .supnorm import (
    TruncationMap,
    build_window,
    density_adaptive,
    density_truncation,
    regression_adaptive,
    regression_truncation,
)
from .ustat import Dataset, InfluenceTriple, estimate_phi, quadratic_term
from .wavelets import family_from_config


@lru_cache(maxsize=1)
def calibrated_defaults():
    """Constants from the shipped calibration run (``defaults.json``)."""
    return json.loads(resources.files("adaptfunc").joinpath("defaults.json").read_text())


def _calibrated(name):
    return field(default_factory=lambda: float(calibrated_defaults()[name]["value"]))


@dataclass
class PipelineConfig:
    problem: str = "quadratic"
    family: str = "haar"
    nuisance_family: str = "haar"
    beta_min: float = 0.1
    beta_max: float = 0.9
    gamma_min: float = 0.5
    gamma_max: float = 0.9
    eps: float = 0.1
    M: float = 2.0
    B_L: float = 0.25
    B_U: float = 2.0
    C_opt: float = _calibrated("C_opt")
    C_star: float = _calibrated("C_star")
    C_dstar: float = _calibrated("C_dstar")
    grid_mode: str = "span"
    c: float = 1.5
    seed: int | None = None
    shuffle: bool = False
    delta_var: float = 1e-3
    variance_mode: str = "uniform"

    @classmethod
    def from_dict(cls, cfg):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(cfg) - known
        if extra:
            raise ContractError(f"unknown pipeline settings: {sorted(extra)}")
        out = cls(**cfg)
        out.validate()
        return out

    def to_dict(self):
        return asdict(self)

    def validate(self):
        if self.problem not in ("treatment", "tau", "missing", "quadratic", "variance"):
            raise ContractError(f"unknown problem {self.problem!r}")
        for name in ("M", "B_L", "B_U", "C_opt", "C_star", "C_dstar", "delta_var"):
            if not getattr(self, name) > 0:
                raise ContractError(f"{name} must be positive")
        if self.B_L > self.B_U:
            raise ContractError("B_L must not exceed B_U")
        if not 0 < self.beta_min <= self.beta_max:
            raise ContractError("need 0 < beta_min <= beta_max")
        if not 0 < self.gamma_min <= self.gamma_max:
            raise ContractError("need 0 < gamma_min <= gamma_max")
        if self.variance_mode not in ("uniform", "normalized"):
            raise ContractError("variance_mode must be uniform or normalized")


@dataclass(frozen=True)
class SplitPlan:
    blocks: tuple

    @property
    def n(self):
        return len(self.blocks[0])


def make_split(n_total, seed=None, shuffle=False):
    """Three equal index blocks; trailing observations beyond ``3 * (n // 3)`` are dropped."""
    n = n_total // 3
    if n < 2:
        raise SampleSizeError(f"need at least 6 observations for a three-way split, got {n_total}")
    order = np.arange(n_total)
    if shuffle:
        order = np.random.default_rng(seed).permutation(n_total)
    return SplitPlan(tuple(np.sort(order[i * n : (i + 1) * n]) for i in range(3)))


@dataclass
class PipelineResult:
    value: float
    l_hat: int
    resolution: int
    trace: dict
    diagnostics: dict = field(default_factory=dict)
    candidates: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "estimate": self.value,
            "l_hat": self.l_hat,
            "resolution": self.resolution,
            "candidates": {str(k): v for k, v in self.candidates.items()},
            "diagnostics": self.diagnostics,
            "trace": self.trace,
        }


def _check_bounded(col, name, bound):
    if col is None:
        raise ContractError(f"column {name} is required")
    bad = np.flatnonzero(np.abs(col) > bound)
    if bad.size:
        raise BoundsError(f"|{name}| = {abs(col[bad[0]])} exceeds B_U = {bound} at observation {int(bad[0])}")


def _windows(cfg, n, d, fam):
    base = fam.base_level
    gw = build_window(n, d, cfg.gamma_min, cfg.gamma_max, base)
    rw = build_window(n, d, cfg.beta_min, cfg.beta_max, base)
    return gw, rw


def _lepski_run(block1, estimator, cfg, family):
    """Candidates over the grid and the selected entry.

    ``estimator(block, j)`` returns the fixed-resolution estimate.
    """
    n = block1.n
    grid = build_grid(n, block1.d, cfg.c, cfg.grid_mode)
    cache = {}
    cands = {}
    res = {}
    for l in range(grid.s_star, grid.N):
        j = max(grid.entries[l].j_star, family.base_level)
        if j not in cache:
            cache[j] = estimator(block1, j)
        cands[l] = cache[j]
        res[l] = j
    l_hat, trace = select_l(cands, grid, cfg.C_opt)
    trace.resolutions = res
    return cands, res, grid, l_hat, trace


def _finish(cands, res, grid, l_hat, trace, diag):
    diag = dict(diag)
    diag["grid"] = {"mode": grid.mode, "N": grid.N, "s_star": grid.s_star, "n": grid.n}
    return PipelineResult(float(cands[l_hat]), l_hat, res[l_hat], trace.to_dict(), diag, cands)


def _fit_density(x, fam, window, cfg):
    return density_adaptive(x, fam, window, cfg.C_star, density_truncation(cfg.B_L, cfg.B_U))


def _triple_value(triple, family):
    def run(block, j):
        return estimate_phi(block, triple, family, j).value

    return run


def _oracle(oracle, key, make):
    """Use a supplied nuisance function when present, else estimate it."""
    if oracle and key in oracle:
        return oracle[key]
    return make()


def _level(fit):
    return getattr(fit, "level", "oracle")


def nuisances_treatment(data, cfg, plan=None, outcome="y", oracle=None):
    """Density from block 3 and the two regressions from block 2."""
    fam = family_from_config(cfg.nuisance_family)
    plan = plan or make_split(data.n, cfg.seed, cfg.shuffle)
    b1, b2, b3 = (data.subset(b) for b in plan.blocks)
    gw, rw = _windows(cfg, plan.n, data.d, fam)
    ghat = _oracle(oracle, "g", lambda: _fit_density(b3.x, fam, gw, cfg))
    rt = regression_truncation(cfg.B_U)
    y2 = getattr(b2, outcome)
    fl = cfg.B_L / 2
    bhat = _oracle(oracle, "b", lambda: regression_adaptive(b2.x, y2, ghat, fam, rw, cfg.C_dstar, rt, g_floor=fl))
    ahat = _oracle(oracle, "a", lambda: regression_adaptive(b2.x, b2.a, ghat, fam, rw, cfg.C_dstar, rt, g_floor=fl))
    return b1, ghat, ahat, bhat


def treatment_triple(ghat, ahat, bhat, B, outcome="y"):
    def parts(D):
        y = getattr(D, outcome)
        g = np.sqrt(ghat(D.x))
        return y - bhat(D.x), D.a - ahat(D.x), g

    return InfluenceTriple(
        L1=lambda D: np.prod(parts(D)[:2], axis=0),
        L2l=lambda D: parts(D)[0] / parts(D)[2],
        L2r=lambda D: parts(D)[1] / parts(D)[2],
        bound=B,
    )


def _bound(cfg, extra=1.0):
    # generous envelope implied by the truncation ranges
    return extra * (9.0 * cfg.B_U**2 + 3.0 * cfg.B_U / math.sqrt(cfg.B_L / 2.0) + 1.0)


def treatment_effect_covariance(data, cfg, plan=None, outcome="y", oracle=None):
    """Adaptive estimate of E[Cov(Y, A | X)].

    ``oracle`` may map any of "g", "a", "b" to known functions of x, which
    then replace the corresponding estimates.
    """
    cfg.validate()
    _check_bounded(data.a, "a", cfg.B_U)
    _check_bounded(getattr(data, outcome), outcome, cfg.B_U)
    fam = family_from_config(cfg.family)
    b1, ghat, ahat, bhat = nuisances_treatment(data, cfg, plan, outcome, oracle)
    triple = treatment_triple(ghat, ahat, bhat, _bound(cfg), outcome)
    cands, res, grid, l_hat, trace = _lepski_run(b1, _triple_value(triple, fam), cfg, fam)
    diag = {"density_level": _level(ghat), "a_level": _level(ahat), "b_level": _level(bhat)}
    return _finish(cands, res, grid, l_hat, trace, diag)


def treatment_effect_tau(data, cfg, plan=None, oracle=None):
    """Variance-weighted effect ``E Cov(Y,A|X) / E Var(A|X)``.

    In the denominator run the outcome is A itself, so an oracle "b" is
    swapped for the oracle "a".
    """
    plan = plan or make_split(data.n, cfg.seed, cfg.shuffle)
    num = treatment_effect_covariance(data, cfg, plan, "y", oracle)
    den_oracle = None
    if oracle:
        den_oracle = {k: v for k, v in oracle.items() if k != "b"}
        if "a" in oracle:
            den_oracle["b"] = oracle["a"]
    den = treatment_effect_covariance(data, cfg, plan, "a", den_oracle)
    if not den.value > cfg.delta_var:
        raise ContractError(f"degenerate variance: estimated E Var(A|X) = {den.value} <= {cfg.delta_var}")
    res = PipelineResult(num.value / den.value, num.l_hat, num.resolution, num.trace)
    res.diagnostics = {"numerator": num.value, "denominator": den.value, "den_trace": den.trace,
                       "numerator_diag": num.diagnostics}
    return res


def nuisances_missing(data, cfg, plan=None, oracle=None):
    """Nuisances for the MAR mean.

    Block 3: marginal density f, density f1 of X among A = 1, and the
    fraction pi of A = 1; the joint density g = f1 * pi.  Block 2: the
    propensity E(A|X) (inverted into a = 1/E(A|X)) and b = E(Y | A=1, X).
    """
    fam = family_from_config(cfg.nuisance_family)
    plan = plan or make_split(data.n, cfg.seed, cfg.shuffle)
    b1, b2, b3 = (data.subset(b) for b in plan.blocks)
    if oracle and all(k in oracle for k in ("g", "a", "b")):
        return b1, oracle["g"], oracle["a"], oracle["b"], {"oracle": sorted(oracle)}
    gw, rw = _windows(cfg, plan.n, data.d, fam)
    fhat = _fit_density(b3.x, fam, gw, cfg)
    obs3 = b3.a == 1
    if obs3.sum() < 2:
        raise SampleSizeError("fewer than two observed outcomes in the density block")
    pi = float(np.mean(b3.a))
    gw1 = build_window(int(obs3.sum()), data.d, cfg.gamma_min, cfg.gamma_max, fam.base_level)
    f1 = density_adaptive(b3.x[obs3], fam, gw1, cfg.C_star,
                          density_truncation(cfg.B_L, cfg.B_U / max(pi, 1e-12)))
    gt = density_truncation(cfg.B_L, cfg.B_U)

    def ghat(x):
        return gt(pi * f1.raw(x))

    # propensity clamp keeps a = 1/propensity within [1/2, 2 B_U]
    pt = TruncationMap(1.0 / cfg.B_U, 1.0, 0.5 / cfg.B_U, 2.0)
    prop = regression_adaptive(b2.x, b2.a, fhat, fam, rw, cfg.C_dstar, pt, g_floor=cfg.B_L / 2)
    obs2 = b2.a == 1
    if obs2.sum() < 2:
        raise SampleSizeError("fewer than two observed outcomes in the regression block")
    rw1 = build_window(int(obs2.sum()), data.d, cfg.beta_min, cfg.beta_max, fam.base_level)
    bhat = regression_adaptive(b2.x[obs2], b2.y[obs2], f1, fam, rw1, cfg.C_dstar,
                               regression_truncation(cfg.B_U), g_floor=cfg.B_L / 2)

    def ahat(x):
        return 1.0 / prop(x)

    diag = {"pi_hat": pi, "f_level": fhat.level, "f1_level": f1.level,
            "propensity_level": prop.level, "b_level": bhat.level}
    return b1, ghat, ahat, bhat, diag


def missing_triple(ghat, ahat, bhat, B):
    """Triple for the MAR mean, written so that value = linear - quadratic.

    ``L2l`` carries ``+A(Y - b)``; this equals adding the U-statistic with
    ``-A(Y - b)`` on the left.
    """

    def r(D):
        return D.a * (D.y - bhat(D.x))

    return InfluenceTriple(
        L1=lambda D: D.a * ahat(D.x) * (D.y - bhat(D.x)) + bhat(D.x),
        L2l=lambda D: r(D) / np.sqrt(ghat(D.x)),
        L2r=lambda D: (D.a * ahat(D.x) - 1.0) / np.sqrt(ghat(D.x)),
        bound=B,
    )


def missing_data_mean(data, cfg, plan=None, oracle=None):
    """Adaptive estimate of E(Y) when Y is observed only if A = 1.

    ``oracle`` must supply all of "g", "a" (inverse propensity), "b" to
    bypass nuisance estimation.
    """
    cfg.validate()
    if data.a is None or not np.all((data.a == 0) | (data.a == 1)):
        raise ContractError("missing-data pipeline needs a binary column a")
    _check_bounded(data.y, "y", cfg.B_U)
    if np.any(data.y[data.a == 0] != 0):
        raise ContractError("column y must be zero where a = 0 (masked outcomes)")
    fam = family_from_config(cfg.family)
    b1, ghat, ahat, bhat, diag = nuisances_missing(data, cfg, plan, oracle)
    triple = missing_triple(ghat, ahat, bhat, _bound(cfg, 2.0))
    cands, res, grid, l_hat, trace = _lepski_run(b1, _triple_value(triple, fam), cfg, fam)
    return _finish(cands, res, grid, l_hat, trace, diag)


def quadratic_triple(ghat, bhat, B):
    """Triple for E[b(X)^2]; ``L2l`` is negated so that the U-term is added."""

    def r(D):
        return (D.y - bhat(D.x)) / np.sqrt(ghat(D.x))

    return InfluenceTriple(
        L1=lambda D: (2.0 * D.y - bhat(D.x)) * bhat(D.x),
        L2l=lambda D: -r(D),
        L2r=r,
        bound=B,
    )


def quadratic_nuisances(data, cfg, plan=None, oracle=None):
    fam = family_from_config(cfg.nuisance_family)
    plan = plan or make_split(data.n, cfg.seed, cfg.shuffle)
    b1, b2, b3 = (data.subset(b) for b in plan.blocks)
    gw, rw = _windows(cfg, plan.n, data.d, fam)
    ghat = _oracle(oracle, "g", lambda: _fit_density(b3.x, fam, gw, cfg))
    bhat = _oracle(oracle, "b", lambda: regression_adaptive(
        b2.x, b2.y, ghat, fam, rw, cfg.C_dstar, regression_truncation(cfg.B_U), g_floor=cfg.B_L / 2))
    return b1, ghat, bhat


def quadratic_functional(data, cfg, plan=None, oracle=None):
    """Adaptive estimate of E[(E(Y|X))^2]."""
    cfg.validate()
    _check_bounded(data.y, "y", cfg.B_U)
    fam = family_from_config(cfg.family)
    b1, ghat, bhat = quadratic_nuisances(data, cfg, plan, oracle)
    triple = quadratic_triple(ghat, bhat, _bound(cfg))
    cands, res, grid, l_hat, trace = _lepski_run(b1, _triple_value(triple, fam), cfg, fam)
    diag = {"density_level": _level(ghat), "b_level": _level(bhat)}
    return _finish(cands, res, grid, l_hat, trace, diag)


def variance_estimate(block, family, j, weights=None):
    """``(1/2) 1/(n(n-1)) sum_{i != i'} (Y_i - Y_i')^2 K_j(X_i, X_i') w_i w_i'``."""
    # differences are shift invariant; centring makes a constant column exactly zero
    y = block.y - np.median(block.y)
    w = np.ones(block.n) if weights is None else weights
    n = block.n
    if n < 2:
        raise SampleSizeError("variance estimate needs n >= 2")
    # (y_i - y_i')^2 = y_i^2 + y_i'^2 - 2 y_i y_i'; the two squared terms coincide by symmetry
    q1 = quadratic_term(family, j, block.x, y * y * w, w)
    q2 = quadratic_term(family, j, block.x, y * w, y * w)
    return q1 - q2


def variance_functional(data, cfg, plan=None, oracle=None):
    """Adaptive estimate of the noise variance under homoscedasticity."""
    cfg.validate()
    _check_bounded(data.y, "y", cfg.B_U)
    fam = family_from_config(cfg.family)
    diag = {"mode": cfg.variance_mode}
    if cfg.variance_mode == "uniform":
        block = data
        weights = None
    else:
        nf = family_from_config(cfg.nuisance_family)
        plan = plan or make_split(data.n, cfg.seed, cfg.shuffle)
        block = data.subset(plan.blocks[0])
        b3 = data.subset(plan.blocks[2])
        gw, _ = _windows(cfg, plan.n, data.d, nf)
        ghat = _oracle(oracle, "g", lambda: _fit_density(b3.x, nf, gw, cfg))
        weights = 1.0 / np.sqrt(ghat(block.x))
        diag["density_level"] = _level(ghat)

    def run(b, j):
        return variance_estimate(b, fam, j, weights)

    cands, res, grid, l_hat, trace = _lepski_run(block, run, cfg, fam)
    return _finish(cands, res, grid, l_hat, trace, diag)


PIPELINES = {
    "treatment": treatment_effect_covariance,
    "tau": treatment_effect_tau,
    "missing": missing_data_mean,
    "quadratic": quadratic_functional,
    "variance": variance_functional,
}


def run_pipeline(data, cfg, plan=None, oracle=None):
    return PIPELINES[cfg.problem](data, cfg, plan, oracle=oracle)
