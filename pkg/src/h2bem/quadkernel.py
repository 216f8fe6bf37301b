"""Laplace kernels, Galerkin quadrature, moments, and a dense assembler.

Panel pairs are integrated over the reference triangle
``tau = {(u, v): 0 <= v <= u <= 1}`` with the parameterization
``chi(u, v) = A + u (B - A) + v (C - B)`` (surface element ``2 area``,
barycentrics ``(1 - u, u - v, v)``).  Disjoint pairs use a tensor
Gauss-Duffy rule; pairs sharing a vertex, an edge, or all three vertices
use relative-coordinate transformations that remove the kernel
singularity, with the shared simplex moved to the leading corners of both
panels.  All rules are precomputed as flat point/weight tables on the
reference element, so batched assembly is a gather plus one einsum per
case.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .interpolation import TensorGrid
from .mesh import BasisFamily, BasisKind, SurfaceMesh

FOUR_PI = 4.0 * np.pi

#: dense assembly refuses matrices with more entries than this
DENSE_ENTRY_GUARD = 4_194_304


class KernelKind(enum.Enum):
    SINGLE_LAYER_LAPLACE = "single_layer_laplace"
    DOUBLE_LAYER_LAPLACE = "double_layer_laplace"


class ColumnVariant(enum.Enum):
    """Which functional the column moments integrate against."""

    VALUE = "value"
    NORMAL_DERIVATIVE = "normal_derivative"


@dataclass(frozen=True)
class Kernel:
    """Laplace single- or double-layer kernel.

    ``evaluate`` is the kernel appearing in the Galerkin entries (for the
    double layer it includes the normal derivative at y); ``coupling`` is
    the underlying translation-invariant point kernel 1/(4 pi |x-y|) that
    farfield interpolation samples for both operators.
    """

    kind: KernelKind

    @property
    def column_variant(self) -> ColumnVariant:
        if self.kind is KernelKind.DOUBLE_LAYER_LAPLACE:
            return ColumnVariant.NORMAL_DERIVATIVE
        return ColumnVariant.VALUE

    def coupling(self, x, y) -> np.ndarray:
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        r2 = np.einsum("...i,...i->...", d, d)
        with np.errstate(divide="ignore"):
            v = 1.0 / (FOUR_PI * np.sqrt(r2))
        return np.where(r2 == 0.0, 0.0, v)

    def evaluate(self, x, y, normal_y=None) -> np.ndarray:
        if self.kind is KernelKind.SINGLE_LAYER_LAPLACE:
            return self.coupling(x, y)
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        r2 = np.einsum("...i,...i->...", d, d)
        num = np.einsum("...i,...i->...", d, np.asarray(normal_y, dtype=float))
        with np.errstate(divide="ignore", invalid="ignore"):
            v = num / (FOUR_PI * r2 * np.sqrt(r2))
        return np.where(r2 == 0.0, 0.0, v)


def _gauss01(q: int):
    x, w = np.polynomial.legendre.leggauss(q)
    return 0.5 * (x + 1.0), 0.5 * w


def _duffy_rule(q: int):
    """Tensor Gauss rule on tau via (u, v) = (g1, g1 g2), jacobian g1."""
    g, w = _gauss01(q)
    u = np.repeat(g, q)
    t = np.tile(g, q)
    wt = np.repeat(w, q) * np.tile(w, q) * u
    uv = np.stack([u, u * t], axis=1)
    return uv, wt


def _bary(uv: np.ndarray) -> np.ndarray:
    u, v = uv[:, 0], uv[:, 1]
    return np.stack([1.0 - u, u - v, v], axis=1)


def _tensor4(q: int):
    g, w = _gauss01(q)
    idx = np.indices((q, q, q, q)).reshape(4, -1)
    pts = g[idx]
    wts = w[idx].prod(axis=0)
    return pts[0], pts[1], pts[2], pts[3], wts


def _table_separate(q: int):
    uv, w = _duffy_rule(q)
    nx = len(uv)
    xh = np.repeat(uv, nx, axis=0)
    yh = np.tile(uv, (nx, 1))
    wt = np.repeat(w, nx) * np.tile(w, nx)
    return xh, yh, wt


def _table_identical(q: int):
    """Relative-coordinate rule for coincident panels.

    The difference z = x - y is split into three cones (z1 dominant, z2
    dominant, and the mixed-sign cone); in each cone z is Duffy-scaled and
    the remaining panel variable runs over the shrunken triangle.  Each
    cone is emitted in both argument orders.
    """
    ze, wv, sg, ta, w4 = _tensor4(q)
    jac = ze * (1.0 - ze) ** 2 * sg
    regions = []
    # cone 0 <= z2 <= z1
    z = np.stack([ze, ze * wv], axis=1)
    y = np.stack([(1.0 - ze) * sg, (1.0 - ze) * sg * ta], axis=1)
    regions.append((z, y))
    # cone 0 <= z1 <= z2
    z = np.stack([ze * wv, ze], axis=1)
    y = np.stack([ze * (1.0 - wv) + sg * (1.0 - ze), sg * ta * (1.0 - ze)], axis=1)
    regions.append((z, y))
    # cone z1 <= 0 <= z2
    z = np.stack([ze * (wv - 1.0), ze * wv], axis=1)
    y = np.stack([ze + sg * (1.0 - ze), sg * ta * (1.0 - ze)], axis=1)
    regions.append((z, y))
    xh, yh, wt = [], [], []
    for z, y in regions:
        xh.append(y + z)
        yh.append(y)
        wt.append(w4 * jac)
        xh.append(y)
        yh.append(y + z)
        wt.append(w4 * jac)
    return np.vstack(xh), np.vstack(yh), np.concatenate(wt)


def _table_edge(q: int):
    """Five-region rule for panels sharing the (corner0, corner1) edge.

    The region list is not invariant under swapping the two panels, so it
    is emitted symmetrized (both argument orders at half weight); together
    with the aligned corner ordering this makes Galerkin matrices of
    symmetric kernels symmetric to rounding.
    """
    xi, e1, e2, e3, w4 = _tensor4(q)
    j1 = xi**3 * e1**2
    j2 = j1 * e2
    regions = [
        ((xi, xi * e1 * e3), (xi * (1 - e1 * e2), xi * e1 * (1 - e2)), j1),
        ((xi, xi * e1), (xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3)), j2),
        ((xi * (1 - e1 * e2), xi * e1 * (1 - e2)), (xi, xi * e1 * e2 * e3), j2),
        ((xi * (1 - e1 * e2 * e3), xi * e1 * e2 * (1 - e3)), (xi, xi * e1), j2),
        ((xi * (1 - e1 * e2 * e3), xi * e1 * (1 - e2 * e3)), (xi, xi * e1 * e2), j2),
    ]
    xh = np.vstack([np.stack(r[0], axis=1) for r in regions]
                   + [np.stack(r[1], axis=1) for r in regions])
    yh = np.vstack([np.stack(r[1], axis=1) for r in regions]
                   + [np.stack(r[0], axis=1) for r in regions])
    wt = 0.5 * np.concatenate([w4 * r[2] for r in regions] * 2)
    return xh, yh, wt


def _table_vertex(q: int):
    """Two-region rule for panels sharing corner0."""
    xi, e1, e2, e3, w4 = _tensor4(q)
    jac = xi**3 * e2
    xh = np.vstack([
        np.stack([xi, xi * e1], axis=1),
        np.stack([xi * e2, xi * e2 * e3], axis=1),
    ])
    yh = np.vstack([
        np.stack([xi * e2, xi * e2 * e3], axis=1),
        np.stack([xi, xi * e1], axis=1),
    ])
    wt = np.concatenate([w4 * jac, w4 * jac])
    return xh, yh, wt


@dataclass(frozen=True)
class _PairTable:
    xhat: np.ndarray
    yhat: np.ndarray
    weights: np.ndarray
    bary_x: np.ndarray = field(default=None)
    bary_y: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.bary_x is None:
            object.__setattr__(self, "bary_x", _bary(self.xhat))
        if self.bary_y is None:
            object.__setattr__(self, "bary_y", _bary(self.yhat))


@dataclass(frozen=True)
class QuadratureRule:
    """Regular and singular quadrature tables.

    ``q_reg`` is the number of Gauss points per direction for regular
    integrals (2 by default), ``q_sing`` for the singular transformations
    (4 by default).
    """

    q_reg: int = 2
    q_sing: int = 4
    reg_uv: np.ndarray = field(default=None, repr=False)
    reg_w: np.ndarray = field(default=None, repr=False)
    tables: dict = field(default=None, repr=False)

    def __post_init__(self):
        if self.q_reg < 1 or self.q_sing < 1:
            raise ValueError("quadrature orders must be positive")
        uv, w = _duffy_rule(self.q_reg)
        object.__setattr__(self, "reg_uv", uv)
        object.__setattr__(self, "reg_w", w)
        tables = {
            0: _PairTable(*_table_separate(self.q_reg)),
            1: _PairTable(*_table_vertex(self.q_sing)),
            2: _PairTable(*_table_edge(self.q_sing)),
            3: _PairTable(*_table_identical(self.q_sing)),
        }
        object.__setattr__(self, "tables", tables)


def triangle_quadrature(mesh: SurfaceMesh, tri_ids, rule: QuadratureRule):
    """Per-triangle physical points and weights for the regular rule.

    Returns points (m, Q, 3), weights (m, Q), and the reference
    barycentrics (Q, 3) shared by all triangles.
    """
    corners = mesh.triangle_corners(tri_ids)
    a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
    u = rule.reg_uv[:, 0][None, :, None]
    v = rule.reg_uv[:, 1][None, :, None]
    pts = a[:, None, :] + u * (b - a)[:, None, :] + v * (c - b)[:, None, :]
    wts = rule.reg_w[None, :] * (2.0 * mesh.areas[tri_ids])[:, None]
    return pts, wts, _bary(rule.reg_uv)


def _classify_pairs(triangles: np.ndarray, tri_x, tri_y):
    """Shared-vertex count (0..3) and slot permutations per pair.

    ``perm[n, r]`` is the original corner slot sitting at reordered
    position r; shared corners come first, and for edge pairs the two
    shared corners are aligned across both panels by global vertex id.
    """
    va, vb = triangles[tri_x], triangles[tri_y]
    match = va[:, :, None] == vb[:, None, :]
    shared_a = match.any(axis=2)
    shared_b = match.any(axis=1)
    count = shared_a.sum(axis=1)
    perm_a = np.argsort(~shared_a, axis=1, kind="stable").astype(np.int64)
    perm_b = np.argsort(~shared_b, axis=1, kind="stable").astype(np.int64)
    edge = count == 2
    if np.any(edge):
        for perm, verts in ((perm_a, va), (perm_b, vb)):
            lead = np.take_along_axis(verts, perm[:, :2], axis=1)
            swap = edge & (lead[:, 0] > lead[:, 1])
            if np.any(swap):
                perm[swap, 0], perm[swap, 1] = perm[swap, 1], perm[swap, 0].copy()
    return count, perm_a, perm_b


def _pair_case_values(kernel, mesh, tri_x, tri_y, perm_x, perm_y, table,
                      slot_x, slot_y):
    """Batched pair integrals for one sharing case.

    ``slot_x``/``slot_y`` select the shape function on each side: None for
    the constant 1, otherwise per-pair original corner slots whose
    barycentric coordinate weights the integrand.  Returns (N,) values
    including the surface elements of both panels.
    """
    cx = mesh.vertices[np.take_along_axis(mesh.triangles[tri_x], perm_x, axis=1)]
    cy = mesh.vertices[np.take_along_axis(mesh.triangles[tri_y], perm_y, axis=1)]

    def param(corners, uv):
        a, b, c = corners[:, 0], corners[:, 1], corners[:, 2]
        u = uv[:, 0][None, :, None]
        v = uv[:, 1][None, :, None]
        return a[:, None, :] + u * (b - a)[:, None, :] + v * (c - b)[:, None, :]

    px = param(cx, table.xhat)
    py = param(cy, table.yhat)
    ny = mesh.normals[tri_y]
    vals = kernel.evaluate(px, py, ny[:, None, :])
    vals *= table.weights[None, :]
    if slot_x is not None:
        # barycentric of the owning corner, translated to the reordered frame
        inv_x = np.argsort(perm_x, axis=1)
        reo = np.take_along_axis(inv_x, slot_x[:, None], axis=1)[:, 0]
        vals *= table.bary_x.T[reo]
    if slot_y is not None:
        inv_y = np.argsort(perm_y, axis=1)
        reo = np.take_along_axis(inv_y, slot_y[:, None], axis=1)[:, 0]
        vals *= table.bary_y.T[reo]
    out = vals.sum(axis=1)
    out *= 4.0 * mesh.areas[tri_x] * mesh.areas[tri_y]
    return out


def pair_integrals(kernel: Kernel, mesh: SurfaceMesh, tri_x, tri_y,
                   rule: QuadratureRule, slot_x=None, slot_y=None,
                   chunk_entries: int = 4_000_000) -> np.ndarray:
    """Galerkin pair integrals for arbitrary triangle pairs.

    Computes, for each pair, the double surface integral of the kernel
    times the selected shape functions, dispatching to the regular or the
    matching singular rule by the number of shared vertices.  Coincident
    panels under the double-layer kernel integrate to exactly zero (the
    kernel vanishes on flat panels) and are skipped.
    """
    tri_x = np.asarray(tri_x, dtype=np.int64)
    tri_y = np.asarray(tri_y, dtype=np.int64)
    out = np.zeros(len(tri_x))
    count, perm_x, perm_y = _classify_pairs(mesh.triangles, tri_x, tri_y)
    for case in range(4):
        sel = np.nonzero(count == case)[0]
        if len(sel) == 0:
            continue
        if case == 3 and kernel.kind is KernelKind.DOUBLE_LAYER_LAPLACE:
            continue
        table = rule.tables[case]
        step = max(1, chunk_entries // len(table.weights))
        for lo in range(0, len(sel), step):
            part = sel[lo:lo + step]
            out[part] = _pair_case_values(
                kernel, mesh, tri_x[part], tri_y[part],
                perm_x[part], perm_y[part], table,
                None if slot_x is None else slot_x[part],
                None if slot_y is None else slot_y[part],
            )
    return out


def _expand_side(basis: BasisFamily, ids):
    """Per-function incidences (local row, triangle, slot or None)."""
    ids = np.asarray(ids, dtype=np.int64)
    if basis.kind is BasisKind.PIECEWISE_CONSTANT:
        local = np.arange(len(ids), dtype=np.int64)
        return local, ids, None
    counts = basis.support_ptr[ids + 1] - basis.support_ptr[ids]
    local = np.repeat(np.arange(len(ids), dtype=np.int64), counts)
    gather = np.concatenate([
        np.arange(basis.support_ptr[i], basis.support_ptr[i + 1]) for i in ids
    ]) if len(ids) else np.empty(0, dtype=np.int64)
    return local, basis.support_tris[gather], basis.support_slots[gather]


def galerkin_block(kernel: Kernel, basis_row: BasisFamily, rows,
                   basis_col: BasisFamily, cols, rule: QuadratureRule,
                   chunk_pairs: int = 400_000) -> np.ndarray:
    """Dense Galerkin sub-matrix for the given row/column function ids."""
    if basis_row.mesh is not basis_col.mesh:
        raise ValueError("row and column bases must live on the same mesh")
    mesh = basis_row.mesh
    rl, rt, rs = _expand_side(basis_row, rows)
    cl, ct, cs = _expand_side(basis_col, cols)
    nr, nc = len(np.atleast_1d(rows)), len(np.atleast_1d(cols))
    out = np.zeros(nr * nc)
    nri, nci = len(rl), len(cl)
    for lo in range(0, nri * nci, chunk_pairs):
        hi = min(nri * nci, lo + chunk_pairs)
        flat = np.arange(lo, hi)
        a, b = flat // nci, flat % nci
        vals = pair_integrals(
            kernel, mesh, rt[a], ct[b], rule,
            None if rs is None else rs[a],
            None if cs is None else cs[b],
        )
        np.add.at(out, rl[a] * nc + cl[b], vals)
    return out.reshape(nr, nc)


def entry(kernel: Kernel, basis_row: BasisFamily, i: int,
          basis_col: BasisFamily, j: int, rule: QuadratureRule) -> float:
    """Single Galerkin matrix entry (double surface integral)."""
    return float(galerkin_block(kernel, basis_row, [i], basis_col, [j], rule)[0, 0])


def dense_assemble(kernel: Kernel, basis_row: BasisFamily,
                   basis_col: BasisFamily, rule: QuadratureRule) -> np.ndarray:
    """Full Galerkin matrix; reference oracle for the compressed formats."""
    n_entries = basis_row.size * basis_col.size
    if n_entries > DENSE_ENTRY_GUARD:
        raise ValueError(
            f"dense assembly of {n_entries} entries exceeds the "
            f"{DENSE_ENTRY_GUARD}-entry guard")
    return galerkin_block(kernel, basis_row, np.arange(basis_row.size),
                          basis_col, np.arange(basis_col.size), rule)


def moment_block(basis: BasisFamily, ids, grid: TensorGrid,
                 variant: ColumnVariant, rule: QuadratureRule) -> np.ndarray:
    """Moments of several basis functions against all Lagrange polynomials.

    Row r holds, for basis function ids[r], the surface integrals of the
    basis function times every tensor Lagrange polynomial of the grid
    (VALUE) or times its normal derivative (NORMAL_DERIVATIVE).
    """
    ids = np.asarray(ids, dtype=np.int64)
    mesh = basis.mesh
    local, tris, slots = _expand_side(basis, ids)
    pts, wts, bary = triangle_quadrature(mesh, tris, rule)
    if slots is not None:
        wts = wts * bary.T[slots]
    q = pts.shape[1]
    flat_pts = pts.reshape(-1, 3)
    if variant is ColumnVariant.VALUE:
        lag = grid.eval(flat_pts).reshape(len(tris), q, -1)
    else:
        _, gradv = grid.eval_grad(flat_pts)
        gradv = gradv.reshape(len(tris), q, -1, 3)
        lag = np.einsum("tqka,ta->tqk", gradv, mesh.normals[tris])
    contrib = np.einsum("tq,tqk->tk", wts, lag)
    out = np.zeros((len(ids), grid.size))
    np.add.at(out, local, contrib)
    return out


def moment(basis: BasisFamily, i: int, grid: TensorGrid,
           variant: ColumnVariant, rule: QuadratureRule) -> np.ndarray:
    """Moment vector of one basis function on one interpolation grid."""
    return moment_block(basis, [i], grid, variant, rule)[0]


def mass_entry(basis_row: BasisFamily, i: int,
               basis_col: BasisFamily, j: int) -> float:
    """Exact mass-matrix entry between a constant row and a linear column.

    The integral of a barycentric coordinate over its triangle is area/3,
    so the entry is area/3 per shared support triangle.
    """
    if (basis_row.kind is not BasisKind.PIECEWISE_CONSTANT
            or basis_col.kind is not BasisKind.PIECEWISE_LINEAR):
        raise ValueError("mass_entry expects constant rows and linear columns")
    if j in basis_row.mesh.triangles[i]:
        return float(basis_row.mesh.areas[i] / 3.0)
    return 0.0


def mass_matvec(mesh: SurfaceMesh, vec: np.ndarray) -> np.ndarray:
    """Apply the constant-by-linear mass matrix M to a vertex vector."""
    return mesh.areas / 3.0 * vec[mesh.triangles].sum(axis=1)


def mass_rmatvec(mesh: SurfaceMesh, vec: np.ndarray) -> np.ndarray:
    """Apply M^T to a triangle vector."""
    out = np.zeros(mesh.num_vertices)
    np.add.at(out, mesh.triangles.reshape(-1),
              np.repeat(mesh.areas / 3.0 * vec, 3))
    return out


def linear_gram_matvec(mesh: SurfaceMesh, vec: np.ndarray) -> np.ndarray:
    """Apply the linear-by-linear Gram matrix (exact area/12 rule)."""
    tv = vec[mesh.triangles]
    contrib = mesh.areas[:, None] / 12.0 * (tv.sum(axis=1, keepdims=True) + tv)
    out = np.zeros(mesh.num_vertices)
    np.add.at(out, mesh.triangles.reshape(-1), contrib.reshape(-1))
    return out
