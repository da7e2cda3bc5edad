"""Sup-norm adaptive density and regression estimators with smooth truncation."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import BoundsError, ContractError, SampleSizeError
from .lepski import CANDIDATES, GridWarning, j_of
from .wavelets import CallableRep, CoefficientRep, ScalingRep, entries_nd, holder_coeff_norm, project


@dataclass(frozen=True)
class ResolutionWindow:
    n: int
    d: int
    lo: int
    hi: int
    exponents: tuple
    note: str = ""

    def levels(self):
        return list(range(self.lo, self.hi + 1))


def _window_level(n, d, smooth):
    target = math.floor((n / math.log(n)) ** (1.0 / (2.0 * smooth / d + 1.0)))
    return j_of(max(target, 1), d)


def build_window(n, d, s_min, s_max, base_level=0):
    """Levels ``lo..hi`` with ``2**(lo d) <= floor((n/log n)**(1/(2 s_max/d + 1)))``
    and likewise ``hi`` from ``s_min``; both clamped at the base level."""
    if n < 3:
        raise SampleSizeError("window needs n >= 3")
    if not 0 <= s_min <= s_max:
        raise ContractError("need 0 <= s_min <= s_max")
    lo = _window_level(n, d, s_max)
    hi = _window_level(n, d, s_min)
    note = ""
    if lo < base_level or hi < base_level:
        note = f"window clamped at base level {base_level}"
    lo, hi = max(lo, base_level), max(hi, base_level)
    return ResolutionWindow(n, d, lo, hi, (s_min, s_max), note)


# ----------------------------------------------------------------------------
# smooth truncation
# ----------------------------------------------------------------------------


def _smooth_step(u):
    u = np.clip(u, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        e0 = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        e1 = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    return e0 / (e0 + e1)


_F_GRID = np.linspace(0.0, 1.0, 2**14 + 1)
_F_VALS = np.concatenate(
    [[0.0], np.cumsum(0.5 * np.diff(_F_GRID) * (2.0 - _smooth_step(_F_GRID[:-1]) - _smooth_step(_F_GRID[1:])))]
)


def _ramp(s):
    # F(s) = int_0^s (1 - step(t)) dt, flat at F(1) = 1/2 beyond s = 1
    return np.interp(np.clip(s, 0.0, 1.0), _F_GRID, _F_VALS)


@dataclass(frozen=True)
class TruncationMap:
    """Identity on ``[lower, upper]``; saturates smoothly inside
    ``(out_lower, out_upper)``; slope between 0 and 1."""

    lower: float
    upper: float
    out_lower: float
    out_upper: float

    def __post_init__(self):
        if not (self.out_lower < self.lower <= self.upper < self.out_upper):
            raise ContractError("need out_lower < lower <= upper < out_upper")

    @property
    def kappa(self):
        return 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        wu = self.out_upper - self.upper
        wl = self.lower - self.out_lower
        up = self.upper + wu * _ramp((x - self.upper) / wu)
        dn = self.lower - wl * _ramp((self.lower - x) / wl)
        out = np.where(x > self.upper, np.clip(up, self.upper, x), x)
        out = np.where(x < self.lower, np.clip(dn, x, self.lower), out)
        return out

    def to_dict(self):
        return dict(lower=self.lower, upper=self.upper, out_lower=self.out_lower, out_upper=self.out_upper)


def density_truncation(B_L, B_U):
    """The clamp used for densities: identity on [B_L, B_U], range [B_L/2, 2 B_U]."""
    return TruncationMap(B_L, B_U, B_L / 2.0, 2.0 * B_U)


def regression_truncation(B_U):
    """The clamp used for regressions: identity on [-B_U, B_U], range [-2 B_U, 2 B_U]."""
    return TruncationMap(-B_U, B_U, -2.0 * B_U, 2.0 * B_U)


def smooth_truncate(h, tmap):
    """Pointwise ``tmap(h(x))``."""
    d = getattr(h, "d", 1)
    return CallableRep(lambda x: tmap(h(x)), d, max(abs(tmap.out_lower), abs(tmap.out_upper)),
                       bounds=(tmap.out_lower, tmap.out_upper))


# ----------------------------------------------------------------------------
# estimators
# ----------------------------------------------------------------------------


def dyadic_grid(level, d):
    """Cell midpoints of the level-``level`` dyadic partition of [0,1]^d."""
    m = (np.arange(2**level) + 0.5) / 2**level
    if d == 1:
        return m[:, None]
    mesh = np.meshgrid(*([m] * d), indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def sup_distance(h1, h2, grid_level, d=1):
    pts = dyadic_grid(grid_level, d)
    return float(np.max(np.abs(np.asarray(h1(pts)) - np.asarray(h2(pts)))))


def scaling_fit(family, level, x, weights):
    """``(1/n) sum_i w_i phi_lk(X_i)`` for every shift ``k`` at ``level``."""
    n, d = x.shape
    idx, val = entries_nd(family, level, x)
    coef = np.zeros(2 ** (level * d))
    np.add.at(coef, idx.ravel(), (weights[:, None] * val).ravel())
    return ScalingRep(family, level, (coef / n).reshape((2**level,) * d), d)


@dataclass
class AdaptiveFit:
    rep: CallableRep
    level: int
    raw: ScalingRep
    candidates: dict
    distances: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)

    def __call__(self, x):
        return self.rep(x)

    def to_dict(self):
        return {
            "level": self.level,
            "candidate_levels": sorted(self.candidates),
            "distances": {f"{a},{b}": v for (a, b), v in self.distances.items()},
            "thresholds": {str(k): v for k, v in self.thresholds.items()},
        }


def _lepski_sup(cands, levels, C, n, d, grid_level):
    pts = dyadic_grid(grid_level, d)
    vals = {l: cands[l](pts) for l in levels}
    thr = {l: C * math.sqrt(2.0 ** (l * d) * l * d / n) for l in levels}
    dist = {}
    chosen = levels[-1]
    for j in levels:
        ok = True
        for l in levels:
            if l < j:
                continue
            dist[(j, l)] = float(np.max(np.abs(vals[j] - vals[l])))
            if dist[(j, l)] > thr[l]:
                ok = False
                break
        if ok:
            chosen = j
            break
    return chosen, dist, thr


def density_adaptive(x, family, window, C_star, tmap, grid_level=None):
    """Lepski-selected projection density estimate, smoothly truncated."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    if n < 2:
        raise SampleSizeError("density estimation needs n >= 2")
    if not C_star > 0:
        raise ContractError("C_star must be positive")
    levels = window.levels()
    if not levels:
        raise ContractError("empty resolution window")
    gl = window.hi + 2 if grid_level is None else grid_level
    cands = {l: scaling_fit(family, l, x, np.ones(n)) for l in levels}
    chosen, dist, thr = _lepski_sup(cands, levels, C_star, n, d, gl)
    raw = cands[chosen]
    return AdaptiveFit(smooth_truncate(raw, tmap), chosen, raw, cands, dist, thr)


def regression_adaptive(x, w, ghat, family, window, C_dstar, tmap, g_floor=None, grid_level=None):
    """Lepski-selected ``(1/n) sum_i W_i / ghat(X_i) K_j(X_i, .)``, truncated."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    w = np.asarray(w, dtype=float).ravel()
    n, d = x.shape
    if n < 2:
        raise SampleSizeError("regression needs n >= 2")
    if not C_dstar > 0:
        raise ContractError("C_dstar must be positive")
    gx = np.asarray(ghat(x), dtype=float).ravel()
    if g_floor is not None and np.any(gx < g_floor):
        i = int(np.argmin(gx))
        raise BoundsError(f"design density estimate {gx[i]} below floor {g_floor} at observation {i}")
    if np.any(gx <= 0):
        raise BoundsError("design density estimate is not positive")
    levels = window.levels()
    if not levels:
        raise ContractError("empty resolution window")
    gl = window.hi + 2 if grid_level is None else grid_level
    cands = {l: scaling_fit(family, l, x, w / gx) for l in levels}
    chosen, dist, thr = _lepski_sup(cands, levels, C_dstar, n, d, gl)
    raw = cands[chosen]
    return AdaptiveFit(smooth_truncate(raw, tmap), chosen, raw, cands, dist, thr)


def holder_certificate(h, beta, C, family=None, level=None, d=None):
    """True iff the Hölder coefficient norm of ``h`` (through ``level``) is ``<= C``."""
    if not isinstance(h, CoefficientRep):
        if family is None or level is None:
            raise ContractError("non-coefficient input needs family and level")
        h = project(family, level, h, d or getattr(h, "d", 1))
    return holder_coeff_norm(h, beta) <= C


def calibrate_constant(run, reps, target_quantile, rng=None, candidates=CANDIDATES):
    """Smallest candidate ``C`` with ``run(rng, C) is True`` (an over-selection
    event) in at most ``1 - target_quantile`` of the replicates.

    ``run(rng)`` must return a function ``C -> bool`` so that one dataset is
    reused for every candidate.
    """
    if reps < 50:
        raise ContractError("calibration needs reps >= 50")
    rng = np.random.default_rng(rng)
    evals = [run(rng) for _ in range(reps)]
    rates = {}
    for C in sorted(candidates):
        rates[C] = sum(bool(e(C)) for e in evals) / reps
        if rates[C] <= 1.0 - target_quantile + 1e-12:
            return C, True, rates
    warnings.warn("calibration target not attained; returning the largest candidate", GridWarning, stacklevel=2)
    return max(candidates), False, rates
