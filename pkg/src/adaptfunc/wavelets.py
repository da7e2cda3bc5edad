"""Wavelet bases on [0, 1]^d, projection kernels and Hölder-ball norms.

Conventions.  ``V_j`` is the span of the ``2**(j*d)`` tensor-product
scaling functions at level ``j``; equivalently the father block at the base
level ``J0`` plus mother blocks at levels ``J0 .. j-1``.  The projection
kernel is

    K_j(x, y) = sum_k phi_jk(x) phi_jk(y),

which for Haar equals ``2**(j*d)`` when ``x`` and ``y`` share a level-``j``
dyadic cell and zero otherwise.

Points are arrays of shape ``(n, d)``; a single point may be passed as a
length-``d`` sequence.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .errors import ConstructionError, ContractError, DomainError
from .tables import BoundaryTables, build_tables

GL_NODES, GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@lru_cache(maxsize=None)
def _tables(order, bits):
    return build_tables(order, bits)


@dataclass(frozen=True)
class WaveletFamily:
    """An orthonormal multiresolution family on [0, 1].

    kind : "haar" or "tabulated"
    regularity : number of vanishing moments S (1 for Haar)
    table_bits : tables are stored at step ``2**-table_bits``
    """

    kind: str = "haar"
    regularity: int = 1
    table_bits: int = 14

    def __post_init__(self):
        if self.kind not in ("haar", "tabulated"):
            raise ConstructionError(f"unknown wavelet kind {self.kind!r}")
        if self.kind == "haar" and self.regularity != 1:
            raise ConstructionError("the Haar family has regularity 1")
        if self.kind == "tabulated" and not 2 <= self.regularity <= 10:
            raise ConstructionError("tabulated families need 2 <= S <= 10")

    @property
    def base_level(self):
        if self.kind == "haar":
            return 0
        # left and right edge blocks must not overlap
        return int(math.ceil(math.log2(2 * self.regularity)))

    @property
    def tables(self) -> BoundaryTables | None:
        if self.kind == "haar":
            return None
        return _tables(self.regularity, self.table_bits)

    @property
    def span(self):
        """Support length of one basis function, in units of ``2**-l``."""
        return 1 if self.kind == "haar" else 2 * self.regularity - 1

    def label(self):
        return "haar" if self.kind == "haar" else f"tabulated-S{self.regularity}"


def haar():
    return WaveletFamily("haar", 1)


def tabulated(order, bits=14):
    return WaveletFamily("tabulated", order, bits)


def family_from_config(cfg):
    """``cfg`` is a string like "haar" / "db4" or a mapping with kind/regularity."""
    if isinstance(cfg, WaveletFamily):
        return cfg
    if isinstance(cfg, str):
        if cfg == "haar":
            return haar()
        if cfg.startswith("db"):
            return tabulated(int(cfg[2:]))
        raise ConstructionError(f"unknown wavelet family {cfg!r}")
    kind = cfg.get("kind", "haar")
    if kind == "haar":
        return haar()
    return tabulated(int(cfg["regularity"]), int(cfg.get("table_bits", 14)))


@dataclass(frozen=True)
class MultiresIndex:
    level: int
    k: tuple
    v: tuple


@dataclass(frozen=True)
class HolderBallSpec:
    beta: float
    radius: float
    d: int
    family: WaveletFamily = field(default_factory=haar)

    def __post_init__(self):
        if not self.beta > 0:
            raise ContractError("Hölder exponent must be positive")
        if self.radius < 0:
            raise ContractError("Hölder radius must be nonnegative")
        if self.beta >= self.family.regularity:
            raise ContractError(
                f"exponent {self.beta} needs regularity above it, family has S={self.family.regularity}"
            )

    def contains(self, rep):
        return holder_coeff_norm(rep, self.beta) <= self.radius


def as_points(x, d=None):
    """Coerce to an ``(n, d)`` array.  A 1-D input is one point when d > 1
    and a list of scalar points when d == 1."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1) if d in (None, 1) else x.reshape(1, -1)
    if d is not None and x.shape[1] != d:
        raise DomainError(f"expected points of dimension {d}, got {x.shape[1]}")
    return x


def _check_unit(x):
    if not np.all(np.isfinite(x)) or np.any(x < 0.0) or np.any(x > 1.0):
        bad = np.argwhere(~((x >= 0.0) & (x <= 1.0)))[0]
        raise DomainError(f"point outside [0,1]^d at position {tuple(int(i) for i in bad)}")


def _check_level(family, level):
    if level < family.base_level:
        raise DomainError(f"level {level} below the base level {family.base_level}")


# ----------------------------------------------------------------------------
# univariate evaluation
# ----------------------------------------------------------------------------


def entries_1d(family, level, x, mother=False):
    """Basis functions at ``level`` that may be nonzero at the points ``x``.

    Returns ``(idx, val)`` of shape ``(n, m)``; entries that do not
    correspond to a basis function carry value 0.
    """
    x = np.asarray(x, dtype=float).ravel()
    size = 2**level
    scale = 2.0 ** (level / 2.0)
    if family.kind == "haar":
        u = x * size
        cell = np.minimum(np.floor(u).astype(np.int64), size - 1)
        if mother:
            frac = u - cell
            val = np.where(frac < 0.5, scale, -scale)
        else:
            val = np.full(x.shape, scale)
        return cell[:, None], val[:, None]

    tab = family.tables
    order = family.regularity
    span = 2 * order - 1
    base = tab.psi if mother else tab.phi
    lefts = tab.left_psi if mother else tab.left_phi
    rights = tab.right_psi if mother else tab.right_phi
    u = x * size
    top = np.floor(u).astype(np.int64)
    n = len(x)
    idx = np.zeros((n, span + 2 * order), dtype=np.int64)
    val = np.zeros((n, span + 2 * order))
    for r in range(span):
        t = top - r
        ok = (t >= 1) & (t <= size - 2 * order)
        idx[:, r] = np.where(ok, t + order - 1, 0)
        val[:, r] = np.where(ok, base(u - t), 0.0)
    for p in range(order):
        idx[:, span + p] = p
        val[:, span + p] = lefts[p](u)
        idx[:, span + order + p] = size - 1 - p
        val[:, span + order + p] = rights[p](u - size)
    return idx, scale * val


def eval_1d(family, level, k, x, mother=False):
    """Value of one univariate basis function at the points ``x``."""
    size = 2**level
    if not 0 <= k < size:
        raise DomainError(f"shift {k} outside 0..{size - 1} at level {level}")
    x = np.asarray(x, dtype=float).ravel()
    scale = 2.0 ** (level / 2.0)
    if family.kind == "haar":
        u = x * size - k
        last = k == size - 1
        inside = (u >= 0) & ((u < 1) | (last & (u <= 1)))
        if mother:
            return np.where(inside, np.where(u < 0.5, scale, -scale), 0.0)
        return np.where(inside, scale, 0.0)
    tab = family.tables
    order = family.regularity
    u = x * size
    if k < order:
        shape = (tab.left_psi if mother else tab.left_phi)[k]
        return scale * shape(u)
    if k >= size - order:
        shape = (tab.right_psi if mother else tab.right_phi)[size - 1 - k]
        return scale * shape(u - size)
    shape = tab.psi if mother else tab.phi
    return scale * shape(u - (k - order + 1))


def support_1d(family, level, k):
    """Closed interval (in [0,1]) outside which the function vanishes."""
    size = 2**level
    if family.kind == "haar":
        return k / size, (k + 1) / size
    order = family.regularity
    span = 2 * order - 1
    if k < order:
        return 0.0, min(1.0, span / size)
    if k >= size - order:
        return max(0.0, 1.0 - span / size), 1.0
    t = k - order + 1
    return t / size, (t + span) / size


# ----------------------------------------------------------------------------
# tensor products
# ----------------------------------------------------------------------------


def entries_nd(family, level, x, v=None):
    """Tensor-product version of :func:`entries_1d`.

    Returns ``(idx, val)`` with ``idx`` the row-major linear index in
    ``{0..2**level-1}^d`` and shape ``(n, m**d)``.
    """
    x = np.asarray(x, dtype=float)
    n, d = x.shape
    if v is None:
        v = (0,) * d
    size = 2**level
    idx = np.zeros((n, 1), dtype=np.int64)
    val = np.ones((n, 1))
    for m in range(d):
        i1, v1 = entries_1d(family, level, x[:, m], mother=bool(v[m]))
        idx = (idx[:, :, None] * size + i1[:, None, :]).reshape(n, -1)
        val = (val[:, :, None] * v1[:, None, :]).reshape(n, -1)
    return idx, val


def eval_basis(family, idx: MultiresIndex, x):
    """``prod_m 2**(l/2) psi^{v_m}(2**l x_m - k_m)`` at one point or many."""
    d = len(idx.k)
    if len(idx.v) != d:
        raise DomainError("shift and type vectors differ in length")
    _check_level(family, idx.level)
    if idx.level > family.base_level and not any(idx.v):
        raise DomainError("father-only index allowed only at the base level")
    pts = as_points(x, d)
    _check_unit(pts)
    out = np.ones(len(pts))
    for m in range(d):
        out = out * eval_1d(family, idx.level, idx.k[m], pts[:, m], mother=bool(idx.v[m]))
    return float(out[0]) if np.ndim(x) <= 1 and len(pts) == 1 else out


def kernel_eval(family, j, x1, x2):
    """Projection kernel ``K_j(x1, x2)``; vectorised over paired rows."""
    _check_level(family, j)
    a = np.atleast_2d(np.asarray(x1, dtype=float))
    b = np.atleast_2d(np.asarray(x2, dtype=float))
    if a.shape != b.shape:
        raise DomainError("x1 and x2 must have matching shapes")
    _check_unit(a)
    _check_unit(b)
    out = np.ones(len(a))
    for m in range(a.shape[1]):
        ia, va = entries_1d(family, j, a[:, m])
        ib, vb = entries_1d(family, j, b[:, m])
        if family.kind == "haar":
            # phi_jk(x) phi_jk(y) = 2^j on a shared cell; avoids rounding of 2^(j/2) squared
            out = out * np.where(ia[:, 0] == ib[:, 0], 2.0**j, 0.0)
            continue
        match = ia[:, :, None] == ib[:, None, :]
        out = out * np.sum(np.where(match, va[:, :, None] * vb[:, None, :], 0.0), axis=(1, 2))
    single = np.ndim(x1) <= 1 and np.ndim(x2) <= 1
    return float(out[0]) if single else out


def kernel_eval_full(family, j, x1, x2):
    """Brute-force kernel: loop over every shift at level ``j``."""
    a = np.atleast_1d(np.asarray(x1, dtype=float))
    b = np.atleast_1d(np.asarray(x2, dtype=float))
    total = 1.0
    for m in range(len(a)):
        s = 0.0
        for k in range(2**j):
            s += float(eval_1d(family, j, k, a[m : m + 1])[0] * eval_1d(family, j, k, b[m : m + 1])[0])
        total *= s
    return total


# ----------------------------------------------------------------------------
# coefficient representation
# ----------------------------------------------------------------------------


def _types(d, level, base):
    if level == base:
        yield (0,) * d
    for v in itertools.product((0, 1), repeat=d):
        if any(v):
            yield v


@dataclass
class CoefficientRep:
    """Function given by coefficients on the multiresolution basis.

    ``blocks`` maps ``(level, v)`` to an array of shape ``(2**level,)*d``.
    The represented function lies in ``V_resolution``.
    """

    family: WaveletFamily
    d: int
    resolution: int
    blocks: dict
    bounds: tuple | None = None

    def coefficient(self, idx: MultiresIndex):
        block = self.blocks.get((idx.level, tuple(idx.v)))
        if block is None:
            return 0.0
        return float(block[tuple(idx.k)])

    def items(self):
        for (level, v), block in sorted(self.blocks.items()):
            for k in itertools.product(range(2**level), repeat=self.d):
                yield MultiresIndex(level, k, v), float(block[k])

    def __call__(self, x):
        pts = as_points(x, self.d)
        _check_unit(pts)
        out = np.zeros(len(pts))
        for (level, v), block in self.blocks.items():
            idx, val = entries_nd(self.family, level, pts, v)
            out += np.sum(block.ravel()[idx] * val, axis=1)
        return out

    @property
    def max_level(self):
        return max(level for level, _ in self.blocks) if self.blocks else None


@dataclass
class CallableRep:
    """Function given by a vectorised callable on ``(n, d)`` arrays."""

    fn: object
    d: int
    sup_bound: float | None = None
    bounds: tuple | None = None

    def __call__(self, x):
        pts = as_points(x, self.d)
        return np.asarray(self.fn(pts), dtype=float).reshape(len(pts))


@dataclass
class ScalingRep:
    """Function in ``V_level`` given by its scaling coefficients at ``level``."""

    family: WaveletFamily
    level: int
    coef: np.ndarray
    d: int
    bounds: tuple | None = None

    def __call__(self, x):
        pts = as_points(x, self.d)
        _check_unit(pts)
        idx, val = entries_nd(self.family, self.level, pts)
        return np.sum(self.coef.ravel()[idx] * val, axis=1)


def _quad_rule(family, j, d, refine=None):
    """1-D composite Gauss-Legendre rule: 8 nodes per cell of level ``q``."""
    if refine is None:
        refine = 0 if family.kind == "haar" else (6 if d == 1 else 3)
    q = j + refine
    cells = 2**q
    width = 1.0 / cells
    left = np.arange(cells) * width
    nodes = (left[:, None] + (GL_NODES[None, :] + 1.0) * 0.5 * width).ravel()
    weights = np.tile(GL_WEIGHTS * 0.5 * width, cells)
    return nodes, weights


def _design_1d(family, level, nodes, mother):
    idx, val = entries_1d(family, level, nodes, mother=mother)
    rows = np.repeat(np.arange(len(nodes)), idx.shape[1])
    mat = sp.csr_matrix((val.ravel(), (rows, idx.ravel())), shape=(len(nodes), 2**level))
    mat.sum_duplicates()
    return mat


def _evaluate_on_tensor_grid(h, nodes, d):
    if d == 1:
        pts = nodes[:, None]
    else:
        mesh = np.meshgrid(*([nodes] * d), indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=1)
    vals = np.asarray(h(pts), dtype=float).reshape((len(nodes),) * d)
    if not np.all(np.isfinite(vals)):
        bad = np.argwhere(~np.isfinite(vals))[0]
        raise ContractError(f"non-finite integrand at quadrature node {tuple(int(i) for i in bad)}")
    return vals


@lru_cache(maxsize=8)
def _projection_setup(family, j, d, refine):
    """Quadrature rule, component list, design matrices and Gram factor."""
    base = family.base_level
    nodes, weights = _quad_rule(family, j, d, refine)
    comps = [(base, (0,) * d)]
    if j > base:
        comps += [(l, v) for l in range(base, j) for v in _types(d, l, -1)]
    mats = {}
    for level, v in comps:
        for bit in set(v):
            key = (level, bit)
            if key not in mats:
                mats[key] = _design_1d(family, level, nodes, bool(bit))
    w = sp.diags(weights)
    proj = {key: (m.T @ w).toarray() for key, m in mats.items()}
    if family.kind == "haar":
        return nodes, comps, proj, None
    gram1 = {(ka, kb): proj[ka] @ mats[kb].toarray() for ka in mats for kb in mats}
    sizes = [(2**level) ** d for level, _ in comps]
    offs = np.concatenate([[0], np.cumsum(sizes)])
    gram = np.zeros((offs[-1], offs[-1]))
    for ia, (la, va) in enumerate(comps):
        for ib, (lb, vb) in enumerate(comps):
            blk = np.ones((1, 1))
            for axis in range(d):
                blk = np.kron(blk, gram1[((la, va[axis]), (lb, vb[axis]))])
            gram[offs[ia] : offs[ia + 1], offs[ib] : offs[ib + 1]] = blk
    return nodes, comps, proj, (gram, scipy.linalg.lu_factor(gram))


def project(family, j, h, d=1, refine=None):
    """Orthogonal projection of ``h`` onto ``V_j`` in multiresolution form.

    Coefficients are computed by composite Gauss-Legendre quadrature and a
    Gram correction for the tabulated basis (whose interpolated tables are
    orthonormal only to about 1e-9), so that applying ``project`` to its
    own reconstruction returns the same coefficients.
    """
    _check_level(family, j)
    nodes, comps, proj, factor = _projection_setup(family, j, d, refine)
    hv = _evaluate_on_tensor_grid(h, nodes, d)

    rhs = []
    for level, v in comps:
        t = hv
        for axis in range(d):
            t = np.moveaxis(np.tensordot(proj[(level, v[axis])], np.moveaxis(t, axis, 0), axes=(1, 0)), 0, axis)
        rhs.append(t.ravel())
    b = np.concatenate(rhs)

    if factor is None:
        coef = b
    else:
        gram, lu = factor
        coef = scipy.linalg.lu_solve(lu, b)
        # one refinement step
        coef = coef + scipy.linalg.lu_solve(lu, b - gram @ coef)

    blocks = {}
    pos = 0
    for level, v in comps:
        size = (2**level) ** d
        blocks[(level, v)] = coef[pos : pos + size].reshape((2**level,) * d)
        pos += size
    return CoefficientRep(family, d, j, blocks)


def reconstruct(rep):
    """Return a callable evaluating the coefficient form pointwise."""
    return rep


def holder_coeff_norm(rep, beta):
    """Hölder-ball norm read off wavelet coefficients.

    ``2**(J0 (beta + d/2)) max|father| + sup_{l,k,v} 2**(l (beta + d/2)) |mother|``.
    """
    if not rep.blocks:
        raise DomainError("empty coefficient set")
    d = rep.d
    base = rep.family.base_level
    father = 0.0
    mother = 0.0
    for (level, v), block in rep.blocks.items():
        m = float(np.max(np.abs(block))) if block.size else 0.0
        weight = 2.0 ** (level * (beta + d / 2.0))
        if any(v):
            mother = max(mother, weight * m)
        else:
            father = max(father, 2.0 ** (base * (beta + d / 2.0)) * m)
    return father + mother


def coefficient_rep(family, d, blocks, resolution=None):
    """Build a coefficient form from a dict of blocks, validating shapes."""
    base = family.base_level
    out = {}
    for (level, v), arr in blocks.items():
        v = tuple(int(b) for b in v)
        if level < base:
            raise DomainError(f"level {level} below base level {base}")
        if level > base and not any(v):
            raise DomainError("father block only at the base level")
        arr = np.asarray(arr, dtype=float)
        if arr.shape != (2**level,) * d:
            raise DomainError(f"block {(level, v)} has shape {arr.shape}")
        out[(level, v)] = arr
    if resolution is None:
        resolution = max([lv + 1 for lv, v in out if any(v)] + [base])
    return CoefficientRep(family, d, resolution, out)


def gram_matrix_1d(family, levels, grid_bits=None):
    """Exact inner products of all univariate basis functions up to ``levels``.

    Uses exact integration of the piecewise linear tables on a common grid
    fine enough to contain every knot.  Returns ``(labels, gram)``.
    """
    top = max(levels)
    if family.kind == "haar":
        bits = top + 1
    else:
        bits = grid_bits if grid_bits is not None else family.table_bits + top
    step = 2.0**-bits
    grid = np.arange(2**bits + 1) * step
    rows = []
    labels = []
    base = family.base_level
    for level in levels:
        kinds = [False, True] if level == base else [True]
        for mother in kinds:
            for k in range(2**level):
                labels.append((level, k, int(mother)))
                rows.append(eval_1d(family, level, k, grid, mother=mother))
    rows = np.array(rows)
    if family.kind == "haar":
        # piecewise constant: midpoint values are exact
        mid = (grid[:-1] + grid[1:]) / 2
        vals = np.array([eval_1d(family, l, k, mid, mother=bool(m)) for l, k, m in labels])
        return labels, vals @ vals.T * step
    from .tables import pl_inner

    return labels, pl_inner(rows, rows, step)


def wavelet_check(family, d=1, extra_levels=3, points=200, seed=0):
    """Orthonormality and polynomial-reproduction residuals up to ``J0 + extra_levels``.

    The tensor Gram matrix is the Kronecker power of the univariate one, so
    the bivariate delta is that of the Kronecker square.
    Reproduction projects every monomial of coordinate degree below ``S``.
    """
    if d not in (1, 2):
        raise ContractError("wavelet_check supports d in {1, 2}")
    family = family_from_config(family)
    base = family.base_level
    top = base + extra_levels
    labels, gram = gram_matrix_1d(family, list(range(base, top)))
    if d == 2:
        gram = np.kron(gram, gram)
    ortho = float(np.max(np.abs(gram - np.eye(len(gram)))))
    rng = np.random.default_rng(seed)
    x = rng.random((points, d))
    S = family.regularity
    repro = {}
    for j in range(base, top + 1):
        worst = 0.0
        for powers in np.ndindex(*([S] * d)):
            def mono(p, pw=powers):
                return np.prod([p[:, i] ** pw[i] for i in range(d)], axis=0)

            rep = project(family, j, mono, d)
            worst = max(worst, float(np.max(np.abs(rep(x) - mono(x)))))
        repro[str(j)] = worst
    out = {
        "family": family.label(),
        "d": d,
        "base_level": base,
        "levels": [base, top],
        "basis_size_1d": len(labels),
        "orthonormality_delta": ortho,
        "reproduction_error": repro,
        "reproduction_max": max(repro.values()),
    }
    if family.kind == "haar":
        j = top
        x1, x2 = rng.random((points, d)), rng.random((points, d))
        x2[: points // 2] = np.clip(x1[: points // 2] + (rng.random((points // 2, d)) - 0.5) * 2.0**-j, 0, 1 - 1e-12)
        same = np.all(np.floor(x1 * 2**j) == np.floor(x2 * 2**j), axis=1)
        closed = np.where(same, 2.0 ** (j * d), 0.0)
        out["haar_kernel_max_diff"] = float(np.max(np.abs(kernel_eval(family, j, x1, x2) - closed)))
    return out
