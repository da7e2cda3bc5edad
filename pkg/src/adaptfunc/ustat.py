"""Second-order U-statistic estimators with a projection kernel.

For a triple ``(L1, L2l, L2r)`` and resolution ``j``

    phi_hat = mean(L1) - 1/(n(n-1)) sum_{i != i'} S(L2l(O_i) K_j(X_i, X_i') L2r(O_i'))

where ``S`` symmetrises in the two arguments.  Because ``K_j`` is a sum of
products of basis functions, the pair sum collapses to
``sum_k (s_a[k] s_b[k] - diag[k])`` with ``s_a = sum_i a_i phi_k(X_i)``,
``s_b = sum_i b_i phi_k(X_i)`` and ``diag = sum_i a_i b_i phi_k(X_i)^2``.
Symmetrisation does not change that sum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BoundsError, ContractError, DomainError, SampleSizeError
from .wavelets import _check_level, _check_unit, entries_nd, kernel_eval


@dataclass(frozen=True)
class Observation:
    w: tuple
    x: tuple


@dataclass
class Dataset:
    """i.i.d. records ``O = (W, X)`` stored column-wise.

    ``x`` has shape (n, d); ``y`` and ``a`` are optional length-n columns.
    """

    x: np.ndarray
    y: np.ndarray | None = None
    a: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        self.x = x[:, None] if x.ndim == 1 else x
        n = self.x.shape[0]
        for name in ("y", "a"):
            col = getattr(self, name)
            if col is not None:
                col = np.asarray(col, dtype=float).ravel()
                if len(col) != n:
                    raise ContractError(f"column {name} has length {len(col)}, expected {n}")
                if not np.all(np.isfinite(col)):
                    raise ContractError(f"column {name} has non-finite entries")
                setattr(self, name, col)
        _check_unit(self.x)

    @property
    def n(self):
        return self.x.shape[0]

    @property
    def d(self):
        return self.x.shape[1]

    def __len__(self):
        return self.n

    def subset(self, idx):
        idx = np.asarray(idx)
        return Dataset(
            self.x[idx],
            None if self.y is None else self.y[idx],
            None if self.a is None else self.a[idx],
        )

    def observations(self):
        out = []
        for i in range(self.n):
            w = tuple(float(c[i]) for c in (self.y, self.a) if c is not None)
            out.append(Observation(w, tuple(float(v) for v in self.x[i])))
        return out


@dataclass
class InfluenceTriple:
    """Vectorised functions of a Dataset returning length-n arrays."""

    L1: object
    L2l: object
    L2r: object
    bound: float

    def evaluate(self, data):
        if not self.bound > 0:
            raise ContractError("triple bound must be positive")
        out = []
        for name in ("L1", "L2l", "L2r"):
            v = np.asarray(getattr(self, name)(data), dtype=float)
            v = np.broadcast_to(v, (data.n,)).astype(float)
            bad = np.flatnonzero(~np.isfinite(v) | (np.abs(v) > self.bound))
            if bad.size:
                i = int(bad[0])
                raise BoundsError(f"{name} = {v[i]!r} at observation {i} exceeds bound {self.bound}")
            out.append(v)
        return out


def constant(c):
    return lambda data: np.full(data.n, float(c))


@dataclass(frozen=True)
class SecondOrderEstimate:
    value: float
    linear_part: float
    quadratic_part: float
    j: int
    n: int


def _prepare(data, triple, family, j, min_n=2):
    if data.n < min_n:
        raise SampleSizeError(f"need at least {min_n} observations, got {data.n}")
    _check_level(family, j)
    return triple.evaluate(data)


def coefficient_sums(family, j, x, a, b, unit=False):
    """Per-index sums ``s_a``, ``s_b`` and ``diag`` at resolution ``j``.

    Entries are put in a canonical order (index, then values) before the
    reductions, so the result does not depend on the order of the rows.
    With ``unit`` (Haar only) the basis values ``2**(j d/2)`` are replaced
    by one, leaving the scale to the caller.
    """
    idx, val = entries_nd(family, j, x)
    if unit:
        val = (val != 0.0).astype(float)
    pa = (a[:, None] * val).ravel()
    pb = (b[:, None] * val).ravel()
    idx = idx.ravel()
    keep = val.ravel() != 0.0
    idx, pa, pb = idx[keep], pa[keep], pb[keep]
    order = np.lexsort((pb, pa, idx))
    idx, pa, pb = idx[order], pa[order], pb[order]
    if idx.size == 0:
        empty = np.zeros(0)
        return np.zeros(0, dtype=np.int64), empty, empty, empty
    starts = np.flatnonzero(np.r_[True, idx[1:] != idx[:-1]])
    sa = np.add.reduceat(pa, starts)
    sb = np.add.reduceat(pb, starts)
    sd = np.add.reduceat(pa * pb, starts)
    return idx[starts], sa, sb, sd


def _canonical_fsum(v):
    return math.fsum(np.sort(np.asarray(v, dtype=float)))


def quadratic_term(family, j, x, a, b):
    """``1/(n(n-1)) sum_{i != i'} a_i K_j(X_i, X_i') b_i'`` via coefficient sums."""
    n = len(a)
    if family.kind == "haar":
        # exact power-of-two scale instead of squared 2**(j d/2) roundings
        _, sa, sb, sd = coefficient_sums(family, j, x, a, b, unit=True)
        scale = 2.0 ** (j * np.shape(x)[1])
        return scale * math.fsum(np.sort(sa * sb - sd)) / (n * (n - 1))
    _, sa, sb, sd = coefficient_sums(family, j, x, a, b)
    return math.fsum(np.sort(sa * sb - sd)) / (n * (n - 1))


def estimate_phi(data, triple, family, j):
    """Fast coefficient-space evaluation of the second-order estimator."""
    l1, a, b = _prepare(data, triple, family, j)
    n = data.n
    lin = _canonical_fsum(l1) / n
    quad = quadratic_term(family, j, data.x, a, b)
    return SecondOrderEstimate(lin - quad, lin, quad, j, n)


def estimate_phi_bruteforce(data, triple, family, j):
    """Reference implementation: explicit sum over ordered pairs with ``S``."""
    l1, a, b = _prepare(data, triple, family, j)
    n = data.n
    x = data.x
    total = 0.0
    for i in range(n):
        others = np.delete(np.arange(n), i)
        k = kernel_eval(family, j, np.repeat(x[i : i + 1], n - 1, axis=0), x[others])
        # S h(o1, o2) = (h(o1, o2) + h(o2, o1)) / 2
        h12 = a[i] * k * b[others]
        h21 = a[others] * k * b[i]
        total += math.fsum(0.5 * (h12 + h21))
    quad = total / (n * (n - 1))
    lin = math.fsum(l1) / n
    return SecondOrderEstimate(lin - quad, lin, quad, j, n)


def hoeffding_pieces(data, triple, family, j, reference=None):
    """Hoeffding decomposition of the centred quadratic part.

    Conditional expectations ``E R(o, O)`` and the mean ``E R(O, O')`` are
    replaced by averages over ``reference`` (the data itself by default).
    Returns ``(T1, T2)`` with ``T1 + T2 = quadratic_part - E_ref R``.  With
    the data as its own reference ``T1`` vanishes up to rounding, since the
    linear projection then averages to zero over the sample.
    """
    if data.n < 3:
        raise SampleSizeError(f"need at least 3 observations, got {data.n}")
    _, a, b = _prepare(data, triple, family, j, min_n=3)
    ref = data if reference is None else reference
    if ref is data:
        ra, rb = a, b
    else:
        _, ra, rb = triple.evaluate(ref)
    n = data.n
    idx_r, sa_r, sb_r, _ = coefficient_sums(family, j, ref.x, ra, rb)
    theta = math.fsum(sa_r * sb_r) / ref.n**2
    idx, val = entries_nd(family, j, data.x)
    pos = np.minimum(np.searchsorted(idx_r, idx), max(len(idx_r) - 1, 0))
    hit = (idx_r[pos] == idx) if len(idx_r) else np.zeros(idx.shape, bool)
    mu_a = np.where(hit, sa_r[pos] / ref.n, 0.0) if len(idx_r) else np.zeros(idx.shape)
    mu_b = np.where(hit, sb_r[pos] / ref.n, 0.0) if len(idx_r) else np.zeros(idx.shape)
    # h1(o) = E R(o, O) with R symmetrised
    h1 = 0.5 * (a * np.sum(val * mu_b, axis=1) + b * np.sum(val * mu_a, axis=1))
    u = quadratic_term(family, j, data.x, a, b)
    s1 = math.fsum(h1)
    t1 = 2.0 / n * (s1 - n * theta)
    # degenerate part: mean over i != i' of R - h1(o) - h1(o') + theta
    t2 = u - 2.0 * s1 / n + theta
    return t1, t2


def variance_proxy(j, n, C2, d=1):
    """``C2 * 2**(j d) / n**2``."""
    if n < 1:
        raise ContractError("n must be >= 1")
    return C2 * 2.0 ** (j * d) / float(n) ** 2
