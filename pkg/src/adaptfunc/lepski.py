"""Resolution ladder and Lepski-type selection for second-order estimators."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, GridError, SelectionError
from .ustat import estimate_phi


class GridWarning(UserWarning):
    pass


def j_of(m, d):
    """Largest integer ``j`` with ``2**(j d) <= m``."""
    if m < 1:
        raise ContractError("j(m) needs m >= 1")
    j = int(math.floor(math.log2(m) / d))
    while 2.0 ** ((j + 1) * d) <= m:
        j += 1
    while j > 0 and 2.0 ** (j * d) > m:
        j -= 1
    return j


@dataclass(frozen=True)
class GridEntry:
    l: int
    j: int
    k: float
    beta: float
    k_star: float
    R: float
    j_star: int


@dataclass
class LepskiGrid:
    c: float
    N: int
    entries: list
    s_star: int
    n: int
    d: int
    mode: str
    degenerate: bool = False
    notes: list = field(default_factory=list)

    def to_dict(self):
        return {
            "c": self.c,
            "N": self.N,
            "n": self.n,
            "d": self.d,
            "mode": self.mode,
            "s_star": self.s_star,
            "degenerate": self.degenerate,
            "notes": list(self.notes),
            "entries": [e.__dict__ for e in self.entries],
        }


def _entry(l, j, n, d):
    k = 2.0 ** (j * d)
    logn = math.log(n)
    beta = d / 4.0 * (2.0 * logn / math.log(k) - 1.0)
    expo = 1.0 / (1.0 + 4.0 * beta / d)
    k_star = k / logn**expo
    return GridEntry(l, j, k, beta, k_star, k_star / n**2, j_of(k_star, d))


def build_grid(n, d=1, c=1.5, mode="formula"):
    """Build the resolution ladder.

    mode "formula": ``N`` is the largest integer with
    ``c**(N-1) <= n**(1 - 2/log log n)`` and ``j_l = j(c**l * n)``.
    mode "span": ``2**(j d)`` runs over the dyadic values in
    ``[n, n**2 / log n]`` (a wider ladder usable at moderate n).
    """
    if not c > 1:
        raise ContractError("grid ratio c must exceed 1")
    if n < 16:
        raise GridError("build_grid needs n >= 16")
    if d < 1:
        raise ContractError("dimension must be >= 1")
    logn = math.log(n)
    notes = []
    degenerate = False
    if mode == "formula":
        expo = 1.0 - 2.0 / math.log(logn)
        if expo <= 0:
            msg = f"n={n}: log log n <= 2, formula grid degenerates to one entry"
            warnings.warn(msg, GridWarning, stacklevel=2)
            notes.append(msg)
            degenerate = True
            N = 1
        else:
            cap = expo * logn
            N = int(math.floor(cap / math.log(c) + 1e-12)) + 1
            while N > 1 and (N - 1) * math.log(c) > cap:
                N -= 1
            while N * math.log(c) <= cap:
                N += 1
        js = [j_of(c**l * n, d) for l in range(N)]
    elif mode == "span":
        lo = 0
        while 2.0 ** (lo * d) < n:
            lo += 1
        hi = j_of(n**2 / logn, d)
        if hi < lo:
            raise GridError(f"n={n}: no dyadic level between n and n^2/log n")
        js = list(range(lo, hi + 1))
        N = len(js)
        notes.append("practical-span ladder (not the asymptotic grid)")
    else:
        raise ContractError(f"unknown grid mode {mode!r}")
    entries = [_entry(l, j, n, d) for l, j in enumerate(js)]
    if degenerate:
        s_star = 0
    else:
        s_star = next((e.l for e in entries if e.k_star >= n), N)
    return LepskiGrid(c, N, entries, s_star, n, d, mode, degenerate, notes)


@dataclass
class SelectionTrace:
    estimates: dict
    differences: dict
    thresholds: dict
    witnesses: dict
    l_hat: int
    resolutions: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "l_hat": self.l_hat,
            "estimates": {str(k): v for k, v in self.estimates.items()},
            "resolutions": {str(k): v for k, v in self.resolutions.items()},
            "thresholds": {str(k): v for k, v in self.thresholds.items()},
            "differences": {f"{a},{b}": v for (a, b), v in self.differences.items()},
            "witnesses": {str(k): v for k, v in self.witnesses.items()},
        }


def select_l(estimates, grid, C_opt, n=None):
    """Smallest admissible ``l`` in ``[s_star, N-1]``.

    ``l`` is admissible when ``(est[l] - est[l'])**2 <= C_opt**2 R_l' log n``
    for every ``l' >= l``.
    """
    if not C_opt > 0:
        raise ContractError("C_opt must be positive")
    n = grid.n if n is None else n
    if grid.s_star >= grid.N:
        raise GridError(f"no grid entry has k_* >= n (n={grid.n}); selection undefined")
    ls = list(range(grid.s_star, grid.N))
    missing = [l for l in ls if l not in estimates]
    if missing:
        raise ContractError(f"missing candidate estimates for l in {missing}")
    logn = math.log(n)
    thr = {l: C_opt**2 * grid.entries[l].R * logn for l in ls}
    diffs = {}
    witnesses = {}
    l_hat = None
    for l in ls:
        bad = None
        for lp in ls:
            if lp < l:
                continue
            dsq = (estimates[l] - estimates[lp]) ** 2
            diffs[(l, lp)] = dsq
            if bad is None and dsq > thr[lp]:
                bad = lp
        if bad is None:
            l_hat = l
            break
        witnesses[l] = bad
    if l_hat is None:  # pragma: no cover - l = N-1 always passes
        raise SelectionError("selection set empty")
    est = {l: float(estimates[l]) for l in ls}
    return l_hat, SelectionTrace(est, diffs, thr, witnesses, l_hat)


def candidate_estimates(data, triple, family, grid):
    """Fixed-resolution estimates for every usable grid entry."""
    cache = {}
    out = {}
    res = {}
    for l in range(grid.s_star, grid.N):
        j = max(grid.entries[l].j_star, family.base_level)
        if j not in cache:
            cache[j] = estimate_phi(data, triple, family, j)
        out[l] = cache[j].value
        res[l] = j
    return out, res


def adaptive_estimate(data, triple, family, grid, C_opt):
    """Lepski-selected value of the second-order estimator."""
    if grid.s_star >= grid.N:
        raise GridError(f"no grid entry has k_* >= n (n={grid.n}); selection undefined")
    cands, res = candidate_estimates(data, triple, family, grid)
    l_hat, trace = select_l(cands, grid, C_opt)
    trace.resolutions = res
    return cands[l_hat], trace


# default logarithmic candidate set for the constant
CANDIDATES = tuple(2.0 ** (k / 2.0) for k in range(-8, 13))


@dataclass
class Calibration:
    value: float
    attained: bool
    exceed_rate: dict
    reps: int


def calibrate_copt(model, grid, reps, target_quantile, rng=None, candidates=CANDIDATES, oracle_level=None):
    """Smallest candidate constant controlling over-selection.

    ``model(rng)`` returns ``(data, triple, family)`` from a null generator
    (one where coarse and fine candidates agree in expectation).  The event
    ``l_hat > oracle_level`` (``s_star`` by default) must occur in at most a
    fraction ``1 - target_quantile`` of replicates.
    """
    if reps < 50:
        raise ContractError("calibration needs reps >= 50")
    if not 0 <= target_quantile <= 1:
        raise ContractError("target_quantile must be in [0, 1]")
    cands = sorted(candidates)
    rng = np.random.default_rng(rng)
    oracle = grid.s_star if oracle_level is None else oracle_level
    runs = []
    for _ in range(reps):
        data, triple, family = model(rng)
        est, _ = candidate_estimates(data, triple, family, grid)
        runs.append(est)
    rates = {}
    for C in cands:
        over = sum(select_l(est, grid, C)[0] > oracle for est in runs)
        rates[C] = over / reps
    allowed = 1.0 - target_quantile
    for C in cands:
        if rates[C] <= allowed + 1e-12:
            return Calibration(C, True, rates, reps)
    warnings.warn("calibration target not attained; returning the largest candidate", GridWarning, stacklevel=2)
    return Calibration(cands[-1], False, rates, reps)
