"""Tabulated Daubechies-type scaling functions and wavelets on [0, 1].

The interior functions are the usual compactly supported Daubechies
functions with ``S`` vanishing moments, computed by the cascade algorithm
(exact values at dyadic points, linear interpolation in between).  Near
each end point ``S`` edge scaling functions are built from truncated
polynomial expansions, so that the level-``j`` space has dimension
``2**j`` and still contains every polynomial of degree below ``S``.  Edge
wavelets are the orthogonal complement of the coarse space inside the
next finer one, obtained as a null space in level-one coordinates.

All shapes are stored on a uniform grid of step ``2**-bits`` in reference
units, i.e. before dilation by ``2**j``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import comb
from pathlib import Path

import numpy as np
import pywt

SQRT2 = np.sqrt(2.0)


def daubechies_filter(order):
    """Low-pass synthesis filter with ``order`` vanishing moments, sum sqrt(2)."""
    if order < 1:
        raise ValueError("order must be >= 1")
    if order == 1:
        return np.array([1.0, 1.0]) / SQRT2
    return np.asarray(pywt.Wavelet(f"db{order}").rec_lo, dtype=float)


def cascade(h, bits):
    """Values of the scaling function on ``[0, len(h) - 1]`` at step ``2**-bits``.

    Integer values come from the eigenvector of the two-scale matrix for
    eigenvalue one; each refinement step then fills in the next dyadic
    level from the previous one, so every stored value is exact up to
    rounding.
    """
    h = np.asarray(h, dtype=float)
    length = len(h)
    mat = np.zeros((length, length))
    for n in range(length):
        for m in range(length):
            if 0 <= 2 * n - m < length:
                mat[n, m] = SQRT2 * h[2 * n - m]
    w, vecs = np.linalg.eig(mat)
    vals = np.real(vecs[:, np.argmin(np.abs(w - 1.0))])
    vals = vals / vals.sum()
    for r in range(1, bits + 1):
        size = (length - 1) * 2**r + 1
        new = np.zeros(size)
        step = 2 ** (r - 1)
        for k in range(length):
            lo = k * step
            hi = min(size, lo + len(vals))
            new[lo:hi] += SQRT2 * h[k] * vals[: hi - lo]
        vals = new
    return vals


def _moments(h, count):
    # mu_i = int x^i phi(x) dx from the two-scale relation
    h = np.asarray(h, dtype=float)
    mu = [1.0]
    for i in range(1, count):
        s = 0.0
        for m, hm in enumerate(h):
            s += hm * sum(comb(i, r) * m ** (i - r) * mu[r] for r in range(i))
        mu.append(SQRT2 / 2 ** (i + 1) * s / (1.0 - 2.0**-i))
    return np.array(mu)


@dataclass
class Shape:
    """A piecewise linear function given by values on a uniform grid."""

    start: float
    values: np.ndarray
    step: float

    @property
    def stop(self):
        return self.start + (len(self.values) - 1) * self.step

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        s = (u - self.start) / self.step
        last = len(self.values) - 1
        inside = (s >= 0) & (s <= last)
        s = np.where(inside, s, 0.0)
        i = np.minimum(np.floor(s).astype(np.int64), last - 1) if last > 0 else np.zeros_like(s, dtype=np.int64)
        w = s - i
        v = self.values
        out = (1.0 - w) * v[i] + w * v[np.minimum(i + 1, last)]
        return np.where(inside, out, 0.0)


def pl_inner(a, b, step):
    """Exact integral of products of piecewise linear rows sampled on one grid.

    ``a`` is (m, n) and ``b`` is (p, n); returns the (m, p) matrix.
    """
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    a0, a1 = a[:, :-1], a[:, 1:]
    b0, b1 = b[:, :-1], b[:, 1:]
    return step / 6.0 * (2 * a0 @ b0.T + a0 @ b1.T + a1 @ b0.T + 2 * a1 @ b1.T)


def _sample(func, start, stop, step):
    n = int(round((stop - start) / step)) + 1
    return func(start + step * np.arange(n))


@dataclass
class BoundaryTables:
    """Reference shapes of one boundary-corrected family.

    ``left_phi[p]`` lives on ``[0, 2S-1]``, ``right_phi[p]`` on
    ``[-(2S-1), 0]`` (origin at the right end point); edge wavelets are
    stored likewise.
    """

    order: int
    bits: int
    phi: Shape
    psi: Shape
    left_phi: list
    right_phi: list
    left_psi: list
    right_psi: list
    meta: dict = field(default_factory=dict)

    def all_shapes(self):
        out = {"phi": self.phi, "psi": self.psi}
        for name in ("left_phi", "right_phi", "left_psi", "right_psi"):
            for p, s in enumerate(getattr(self, name)):
                out[f"{name}{p}"] = s
        return out


def _edge_scaling(phi, mu, order, step):
    """Orthonormal left edge scaling shapes for the scaling function ``phi``."""
    span = 2 * order - 1
    grid = np.arange(int(round(span / step)) + 1) * step
    shifts = range(-2 * order + 2, 1)
    trunc = np.array([phi(grid - k) for k in shifts])
    # coefficients of (x / span)^p on phi(x - k)
    coef = np.zeros((order, len(trunc)))
    for p in range(order):
        for c, k in enumerate(shifts):
            coef[p, c] = sum(comb(p, i) * float(k) ** (p - i) * mu[i] for i in range(p + 1)) / span**p
    raw = coef @ trunc
    gram = pl_inner(raw, raw, step)
    chol = np.linalg.cholesky(gram)
    ortho = np.linalg.solve(chol, raw)
    return [Shape(0.0, row, step) for row in ortho]


def _edge_wavelets(phi, h, edges, order, step, window=None):
    """Left edge wavelets: complement of level 0 inside level 1 near the edge."""
    big = window or 8 * order
    span = 2 * order - 1
    g = np.array([(-1) ** m * h[len(h) - 1 - m] for m in range(len(h))])
    fine = step / 2.0
    grid = np.arange(int(round(span / fine)) + 1) * fine

    def lvl1(col, u):
        if col < order:
            return SQRT2 * edges[col](2.0 * u)
        return SQRT2 * phi(2.0 * u - (col - order + 1))

    ncol = order + big
    # level-one coordinates of the level-zero edge functions
    e_rows = np.array([e(grid) for e in edges])
    basis = np.array([lvl1(c, grid) for c in range(ncol)])
    rows = [pl_inner(e_rows, basis, fine)]
    smax = big // 2 + 1
    for filt in (h, g):
        block = np.zeros((smax, ncol))
        for s in range(1, smax + 1):
            for m, fm in enumerate(filt):
                t = 2 * s + m
                if t <= big:
                    block[s - 1, order + t - 1] = fm
        rows.append(block)
    cons = np.vstack(rows)
    _, sing, vt = np.linalg.svd(cons)
    sing_full = np.concatenate([sing, np.zeros(ncol - len(sing))])
    null = vt[np.argsort(sing_full)[:order]].T
    gap = (np.sort(sing_full)[order - 1], np.sort(sing_full)[order])
    # staircase basis: later columns die out first
    zf = null[::-1]
    qq, rr = np.linalg.qr(zf.T)
    stair = (zf @ qq)[::-1][:, ::-1]
    # support and tabulation of each wavelet on the level-zero grid
    last = np.max(np.nonzero(np.abs(stair) > 1e-13)[0])
    stop = (last - order + 1 + 2 * order - 1) / 2.0 if last >= order else span / 2.0
    stop = max(stop, span / 2.0)
    stop = np.ceil(stop)
    coarse = np.arange(int(round(stop / step)) + 1) * step
    basis0 = np.array([lvl1(c, coarse) for c in range(ncol)])
    tab = stair.T @ basis0
    gram = pl_inner(tab, tab, step)
    w, v = np.linalg.eigh(gram)
    tab = (v @ np.diag(w**-0.5) @ v.T) @ tab
    for i in range(order):
        j = np.argmax(np.abs(tab[i]))
        if tab[i, j] < 0:
            tab[i] = -tab[i]
    return [Shape(0.0, row, step) for row in tab], {"null_gap": [float(gap[0]), float(gap[1])]}


def build_tables(order, bits=14):
    """Build all reference shapes for a family with ``order`` vanishing moments."""
    if order < 2:
        raise ValueError("tabulated families need order >= 2; use the Haar family")
    step = 2.0**-bits
    h = daubechies_filter(order)
    span = 2 * order - 1
    phi_vals = cascade(h, bits)
    phi = Shape(0.0, phi_vals, step)
    g = np.array([(-1) ** m * h[len(h) - 1 - m] for m in range(len(h))])
    grid = np.arange(len(phi_vals)) * step
    psi_vals = sum(SQRT2 * gm * phi(2 * grid - m) for m, gm in enumerate(g))
    psi = Shape(0.0, psi_vals, step)

    mu = _moments(h, order)
    left_phi = _edge_scaling(phi, mu, order, step)
    left_psi, meta_l = _edge_wavelets(phi, h, left_phi, order, step)

    # mirror image: phi~(x) = phi(2S-1-x) has the reversed filter
    hr = h[::-1].copy()
    phir = Shape(0.0, phi_vals[::-1].copy(), step)
    mur = _moments(hr, order)
    r_edges = _edge_scaling(phir, mur, order, step)
    r_psi, meta_r = _edge_wavelets(phir, hr, r_edges, order, step)
    right_phi = [Shape(-s.stop, s.values[::-1].copy(), step) for s in r_edges]
    right_psi = [Shape(-s.stop, s.values[::-1].copy(), step) for s in r_psi]
    return BoundaryTables(
        order, bits, phi, psi, left_phi, right_phi, left_psi, right_psi,
        meta={"left": meta_l, "right": meta_r, "span": span},
    )
