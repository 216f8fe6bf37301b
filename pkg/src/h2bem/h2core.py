"""H2-matrix assembly with translation-keyed deduplication, matvec, and
storage accounting, plus a conventional (per-cluster) baseline.

Deduplication keys are integers: transfer matrices are keyed by
``(level, son parity on the split axis)`` and coupling matrices by
``(level, p_t - p_s)``.  Both stores are filled by sampling the level
reference grids directly, never per cluster, so equal keys map to the same
floating-point matrix by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .blocktree import BlockStatus, BlockTree, build_block_tree
from .clustering import (
    AxisBox,
    ClusterTree,
    build_cluster_tree,
    build_reference_levels,
    choose_lmax,
    compute_root_box,
    compute_support_boxes,
)
from .interpolation import TensorGrid, shift_grid
from .mesh import BasisFamily
from .quadkernel import ColumnVariant, Kernel, QuadratureRule, galerkin_block, moment_block


def level_grids(tree: ClusterTree, theta: int) -> list[TensorGrid]:
    """Interpolation grids on the per-level support bounding boxes."""
    return [TensorGrid(theta, geo.support_box) for geo in tree.levels]


@dataclass
class H2Matrix:
    """Compressed Galerkin matrix.

    ``v_leaf``/``w_leaf`` map leaf cluster ids to leaf matrices;
    ``row_key``/``col_key`` map non-root cluster ids to transfer-store
    keys; ``couplings`` lists (row cluster, col cluster, coupling key) for
    the admissible leaves and ``nearfield`` the dense inadmissible blocks.
    In skeleton mode the stores know their keys and shapes but hold no
    matrix data; only storage accounting is available then.
    """

    row_tree: object
    col_tree: object
    block_tree: object
    theta: int
    k: int
    column_variant: ColumnVariant
    v_leaf: dict = field(default_factory=dict)
    w_leaf: dict = field(default_factory=dict)
    row_key: dict = field(default_factory=dict)
    col_key: dict = field(default_factory=dict)
    row_transfer: dict = field(default_factory=dict)
    col_transfer: dict = field(default_factory=dict)
    couplings: list = field(default_factory=list)
    coupling_store: dict = field(default_factory=dict)
    nearfield: list = field(default_factory=list)
    nearfield_index: dict = field(default_factory=dict)
    skeleton: bool = False

    @property
    def shape(self):
        return (self.row_tree.size, self.col_tree.size)


def _uniform_transfers(tree: ClusterTree, grids, skeleton: bool):
    """Transfer store for a uniform tree: one matrix per (level, parity).

    The matrix for parity b on level l is the parent reference grid's
    Lagrange basis evaluated at the points of the level-l reference grid
    shifted by b * delta(l) on the split axis, exactly the two son
    placements allowed by the displacement rule.
    """
    store: dict = {}
    key_of: dict = {}
    for lev in range(1, tree.lmax + 1):
        axis = tree.levels[lev - 1].split_axis
        for cl in tree.by_level[lev]:
            parity = int(cl.p[axis] & 1)
            key = (lev, parity)
            key_of[cl.cid] = key
            if key not in store:
                if skeleton:
                    store[key] = None
                else:
                    shift = np.zeros(grids[lev].dim)
                    shift[axis] = parity * tree.levels[lev].delta[axis]
                    pts = grids[lev].points() + shift
                    store[key] = grids[lev - 1].eval(pts)
    return store, key_of


def sample_coupling(kernel: Kernel, row_grid: TensorGrid, col_grid: TensorGrid,
                    delta: np.ndarray, pdiff) -> np.ndarray:
    """Coupling matrix for an integer displacement difference p_t - p_s.

    S[nu, mu] = g(xi_B[nu], xi_C[mu] - delta * pdiff); by translation
    invariance this equals the kernel at the true shifted grids of every
    block with the same key.
    """
    shift = -delta * np.asarray(pdiff, dtype=float)
    xp = row_grid.points()
    yp = col_grid.points() + shift
    return kernel.coupling(xp[:, None, :], yp[None, :, :])


def assemble_h2(kernel: Kernel, row_tree: ClusterTree, col_tree: ClusterTree,
                block_tree: BlockTree, row_grids, col_grids,
                rule: QuadratureRule,
                column_variant: ColumnVariant = ColumnVariant.VALUE,
                skeleton: bool = False) -> H2Matrix:
    """Assemble the deduplicated H2 approximation on a built block tree.

    Leaf matrices integrate basis functions against the Lagrange
    polynomials of the shifted leaf grids; transfer and coupling matrices
    are computed once per integer key from the level reference grids.
    With ``skeleton=True`` only keys and shapes are recorded (for storage
    studies at sizes where the quadrature would be wasteful).
    """
    theta = row_grids[0].theta
    h2 = H2Matrix(row_tree, col_tree, block_tree, theta, row_grids[0].size,
                  column_variant, skeleton=skeleton)
    h2.row_transfer, h2.row_key = _uniform_transfers(row_tree, row_grids, skeleton)
    h2.col_transfer, h2.col_key = _uniform_transfers(col_tree, col_grids, skeleton)

    for blk in block_tree.admissible_leaves:
        lev = blk.level
        key = (lev, tuple(int(v) for v in blk.row.p - blk.col.p))
        if key not in h2.coupling_store:
            if skeleton:
                h2.coupling_store[key] = None
            else:
                h2.coupling_store[key] = sample_coupling(
                    kernel, row_grids[lev], col_grids[lev],
                    row_tree.levels[lev].delta, key[1])
        h2.couplings.append((blk.row, blk.col, key))

    if not skeleton:
        row_basis, col_basis = row_tree.basis, col_tree.basis
        leaf_row_grid = row_grids[row_tree.lmax]
        leaf_col_grid = col_grids[col_tree.lmax]
        for t in row_tree.leaves:
            grid_t = shift_grid(leaf_row_grid, row_tree.displacement_of(t))
            h2.v_leaf[t.cid] = moment_block(row_basis, t.indices, grid_t,
                                            ColumnVariant.VALUE, rule)
        for s in col_tree.leaves:
            grid_s = shift_grid(leaf_col_grid, col_tree.displacement_of(s))
            h2.w_leaf[s.cid] = moment_block(col_basis, s.indices, grid_s,
                                            column_variant, rule)

    for blk in block_tree.inadmissible_leaves:
        t, s = blk.row, blk.col
        if skeleton:
            mat = None
        else:
            mat = galerkin_block(kernel, row_tree.basis, t.indices,
                                 col_tree.basis, s.indices, rule)
        h2.nearfield_index[(t.cid, s.cid)] = len(h2.nearfield)
        h2.nearfield.append((t, s, mat))
    return h2


def matvec(h2: H2Matrix, x: np.ndarray) -> np.ndarray:
    """Fast matrix-vector product: forward transform, coupling, backward
    transform, plus the dense nearfield."""
    if h2.skeleton:
        raise ValueError("matvec is unavailable on a skeleton assembly")
    x = np.asarray(x, dtype=float)
    nrows, ncols = h2.shape
    if x.shape != (ncols,):
        raise ValueError(f"expected a vector of length {ncols}")

    xhat = np.zeros((len(h2.col_tree.clusters), h2.k))
    for s in reversed(h2.col_tree.clusters):
        if s.is_leaf:
            xhat[s.cid] = h2.w_leaf[s.cid].T @ x[s.indices]
        else:
            acc = xhat[s.cid]
            for son in s.sons:
                acc += h2.col_transfer[h2.col_key[son.cid]].T @ xhat[son.cid]

    yhat = np.zeros((len(h2.row_tree.clusters), h2.k))
    for t, s, key in h2.couplings:
        yhat[t.cid] += h2.coupling_store[key] @ xhat[s.cid]

    y = np.zeros(nrows)
    for t in h2.row_tree.clusters:
        if t.is_leaf:
            y[t.indices] += h2.v_leaf[t.cid] @ yhat[t.cid]
        else:
            for son in t.sons:
                yhat[son.cid] += h2.row_transfer[h2.row_key[son.cid]] @ yhat[t.cid]

    for t, s, mat in h2.nearfield:
        y[t.indices] += mat @ x[s.indices]
    return y


def fold_mass_into_nearfield(h2: H2Matrix, scale: float = 0.5) -> None:
    """Add ``scale * M`` (constant-by-linear mass matrix) into the
    nearfield blocks in place.

    Every nonzero mass entry couples overlapping supports, which always
    land in an inadmissible leaf, so no extra storage is needed.
    """
    if h2.skeleton:
        raise ValueError("cannot fold the mass matrix into a skeleton")
    mesh = h2.row_tree.basis.mesh
    row_leaf = h2.row_tree.index_to_leaf
    col_leaf = h2.col_tree.index_to_leaf
    for i in range(mesh.num_triangles):
        t_cid = row_leaf[i]
        val = scale * mesh.areas[i] / 3.0
        for j in mesh.triangles[i]:
            s_cid = col_leaf[j]
            t, s, mat = h2.nearfield[h2.nearfield_index[(t_cid, s_cid)]]
            r = int(np.searchsorted(t.indices, i))
            c = int(np.searchsorted(s.indices, j))
            mat[r, c] += val


@dataclass
class StorageReport:
    """Unit counts (1 unit = 1 stored scalar) per matrix component."""

    k: int
    lmax: int
    leaf_units: int
    transfer_units: int
    nearfield_units: int
    coupling_units: int
    row_transfer_keys_per_level: dict
    col_transfer_keys_per_level: dict
    coupling_keys_per_level: dict
    gamma_rows: int
    gamma_cols: int

    @staticmethod
    def _mb(units: int) -> float:
        return units * 8.0 / 2**20

    @property
    def leaf_mb(self) -> float:
        return self._mb(self.leaf_units)

    @property
    def transfer_mb(self) -> float:
        return self._mb(self.transfer_units)

    @property
    def nearfield_mb(self) -> float:
        return self._mb(self.nearfield_units)

    @property
    def coupling_mb(self) -> float:
        return self._mb(self.coupling_units)

    @property
    def total_units(self) -> int:
        return (self.leaf_units + self.transfer_units
                + self.nearfield_units + self.coupling_units)


def storage_report(h2: H2Matrix) -> StorageReport:
    """Exact unit counts of the four matrix components."""
    k = h2.k
    leaf_units = k * (h2.row_tree.size + h2.col_tree.size)
    transfer_units = k * k * (len(h2.row_transfer) + len(h2.col_transfer))
    coupling_units = k * k * len(h2.coupling_store)
    nearfield_units = sum(t.size * s.size for t, s, _ in h2.nearfield)

    def keys_per_level(keys):
        out: dict[int, int] = {}
        for key in keys:
            lev = key[0] if isinstance(key, tuple) else key.level
            out[lev] = out.get(lev, 0) + 1
        return out

    coupling_levels: dict[int, set] = {}
    for t, _, key in h2.couplings:
        coupling_levels.setdefault(t.level, set()).add(key)
    return StorageReport(
        k=k,
        lmax=h2.row_tree.lmax,
        leaf_units=leaf_units,
        transfer_units=transfer_units,
        nearfield_units=nearfield_units,
        coupling_units=coupling_units,
        row_transfer_keys_per_level=keys_per_level(h2.row_transfer),
        col_transfer_keys_per_level=keys_per_level(h2.col_transfer),
        coupling_keys_per_level={lev: len(s) for lev, s in coupling_levels.items()},
        gamma_rows=max((t.size for t in h2.row_tree.leaves), default=0),
        gamma_cols=max((s.size for s in h2.col_tree.leaves), default=0),
    )


def sparsity_constants(row_tree: ClusterTree, col_tree: ClusterTree,
                       eta: float) -> dict:
    """Measured enlargement and shape constants and the sparsity constant
    ``C_sp = 2^-d (3 + 2/eta)^d C_bb^d omega_d C_dv`` they imply."""
    d = row_tree.points.shape[1]
    c_bb = 0.0
    c_dv = 0.0
    for geo_r, geo_c in zip(row_tree.levels, col_tree.levels):
        diam_r = geo_r.ref_box.diameter
        c_bb = max(c_bb, geo_r.support_box.diameter / diam_r,
                   geo_c.support_box.diameter / diam_r)
        c_dv = max(c_dv, diam_r**d / geo_r.ref_box.volume)
    omega_d = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
    c_sp = 2.0**-d * (3.0 + 2.0 / eta) ** d * c_bb**d * omega_d * c_dv
    return {"C_bb": c_bb, "C_dv": c_dv, "omega_d": omega_d, "C_sp": c_sp}


def build_uniform_h2(kernel: Kernel, row_basis: BasisFamily,
                     col_basis: BasisFamily, theta: int, eta: float = 2.0,
                     c_rk: float = 2.0, rule: QuadratureRule | None = None,
                     lmax: int | None = None,
                     column_variant: ColumnVariant | None = None,
                     skeleton: bool = False) -> H2Matrix:
    """End-to-end deduplicated assembly from two basis families.

    Builds the shared root box, the reference levels, both cluster trees
    with their support boxes, the block tree, and the H2 matrix.  ``lmax``
    defaults to the resolution rule (smallest admissible multiple of d);
    pass it explicitly for tiny meshes where that rule's precondition
    fails.
    """
    rule = rule or QuadratureRule()
    d = row_basis.characteristic_points.shape[1]
    k = (theta + 1) ** d
    if lmax is None:
        lmax = choose_lmax(row_basis.size, col_basis.size, k, c_rk, d)
    root = compute_root_box(row_basis.characteristic_points,
                            col_basis.characteristic_points)
    row_tree = build_cluster_tree(row_basis.characteristic_points, lmax,
                                  build_reference_levels(root, lmax))
    col_tree = build_cluster_tree(col_basis.characteristic_points, lmax,
                                  build_reference_levels(root, lmax))
    compute_support_boxes(row_tree, row_basis)
    compute_support_boxes(col_tree, col_basis)
    block_tree = build_block_tree(row_tree, col_tree, eta)
    if column_variant is None:
        column_variant = kernel.column_variant
    return assemble_h2(kernel, row_tree, col_tree, block_tree,
                       level_grids(row_tree, theta), level_grids(col_tree, theta),
                       rule, column_variant, skeleton=skeleton)


# ---------------------------------------------------------------------------
# Conventional (non-deduplicated) baseline
# ---------------------------------------------------------------------------


@dataclass
class ConvCluster:
    level: int
    indices: np.ndarray
    box: AxisBox
    support_box: AxisBox
    sons: tuple = ()
    cid: int = -1

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def is_leaf(self) -> bool:
        return len(self.sons) == 0


@dataclass
class ConvClusterTree:
    """Geometrically bisected tree with per-cluster shrunk boxes."""

    root: ConvCluster
    points: np.ndarray
    basis: BasisFamily
    clusters: list = field(default_factory=list)
    leaves: list = field(default_factory=list)
    index_to_leaf: np.ndarray = None

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def lmax(self) -> int:
        return max(c.level for c in self.clusters)


def build_conventional_tree(basis: BasisFamily, leaf_size: int) -> ConvClusterTree:
    """Bisect along the longest box axis, shrinking boxes to their points
    and supports; recursion stops below ``leaf_size`` characteristic
    points."""
    points = basis.characteristic_points
    bounds = basis.support_bounds

    def make(indices, level):
        pts = points[indices]
        box = AxisBox(pts.min(axis=0), pts.max(axis=0))
        sup = AxisBox(np.minimum(box.lower, bounds[indices, 0].min(axis=0)),
                      np.maximum(box.upper, bounds[indices, 1].max(axis=0)))
        return ConvCluster(level, indices, box, sup)

    root = make(np.arange(len(points), dtype=np.int64), 0)
    tree = ConvClusterTree(root, points, basis)
    queue = [root]
    while queue:
        cl = queue.pop(0)
        cl.cid = len(tree.clusters)
        tree.clusters.append(cl)
        if cl.size < leaf_size:
            tree.leaves.append(cl)
            continue
        extent = cl.box.upper - cl.box.lower
        axis = int(np.argmax(extent))
        mid = 0.5 * (cl.box.lower[axis] + cl.box.upper[axis])
        upper_mask = points[cl.indices, axis] >= mid
        if upper_mask.all() or not upper_mask.any():
            tree.leaves.append(cl)  # cannot split further
            continue
        sons = (make(cl.indices[~upper_mask], cl.level + 1),
                make(cl.indices[upper_mask], cl.level + 1))
        cl.sons = sons
        queue.extend(sons)
    tree.index_to_leaf = np.empty(len(points), dtype=np.int64)
    for leaf in tree.leaves:
        tree.index_to_leaf[leaf.indices] = leaf.cid
    return tree


@dataclass
class ConvBlock:
    row: ConvCluster
    col: ConvCluster
    status: BlockStatus

    @property
    def level(self) -> int:
        return self.row.level


@dataclass
class ConvBlockTree:
    row_tree: ConvClusterTree
    col_tree: ConvClusterTree
    eta: float
    blocks: list = field(default_factory=list)
    admissible_leaves: list = field(default_factory=list)
    inadmissible_leaves: list = field(default_factory=list)


def build_conventional_block_tree(row_tree: ConvClusterTree,
                                  col_tree: ConvClusterTree,
                                  eta: float) -> ConvBlockTree:
    bt = ConvBlockTree(row_tree, col_tree, eta)
    stack = [(row_tree.root, col_tree.root)]
    while stack:
        t, s = stack.pop()
        diam = max(t.support_box.diameter, s.support_box.diameter)
        if diam <= eta * t.support_box.distance(s.support_box):
            blk = ConvBlock(t, s, BlockStatus.ADMISSIBLE)
            bt.admissible_leaves.append(blk)
        elif t.is_leaf and s.is_leaf:
            blk = ConvBlock(t, s, BlockStatus.INADMISSIBLE)
            bt.inadmissible_leaves.append(blk)
        else:
            blk = ConvBlock(t, s, BlockStatus.SUBDIVIDED)
            for tt in (t.sons or (t,)):
                for ss in (s.sons or (s,)):
                    stack.append((tt, ss))
        bt.blocks.append(blk)
    return bt


def assemble_h2_conventional(kernel: Kernel, row_basis: BasisFamily,
                             col_basis: BasisFamily, theta: int, eta: float,
                             rule: QuadratureRule,
                             column_variant: ColumnVariant = ColumnVariant.VALUE,
                             skeleton: bool = False) -> H2Matrix:
    """Conventional H2 baseline: per-cluster boxes shrunk to the cluster's
    own points and supports, recursion stopped below 2k points, and an
    individual transfer/coupling matrix for every cluster/admissible leaf.

    Shares the interpolation and quadrature code with the deduplicated
    variant; only tree construction and the store keying differ.
    """
    d = row_basis.characteristic_points.shape[1]
    k = (theta + 1) ** d
    row_tree = build_conventional_tree(row_basis, 2 * k)
    col_tree = build_conventional_tree(col_basis, 2 * k)
    block_tree = build_conventional_block_tree(row_tree, col_tree, eta)

    grids_row = {c.cid: TensorGrid(theta, c.support_box) for c in row_tree.clusters}
    grids_col = {c.cid: TensorGrid(theta, c.support_box) for c in col_tree.clusters}

    h2 = H2Matrix(row_tree, col_tree, block_tree, theta, k, column_variant,
                  skeleton=skeleton)

    def transfers(tree, grids, store, key_of):
        for cl in tree.clusters:
            for son in cl.sons:
                key = (son.level, son.cid)
                key_of[son.cid] = key
                store[key] = None if skeleton else \
                    grids[cl.cid].eval(grids[son.cid].points())

    transfers(row_tree, grids_row, h2.row_transfer, h2.row_key)
    transfers(col_tree, grids_col, h2.col_transfer, h2.col_key)

    for idx, blk in enumerate(block_tree.admissible_leaves):
        key = (blk.row.level, idx)
        if skeleton:
            h2.coupling_store[key] = None
        else:
            xp = grids_row[blk.row.cid].points()
            yp = grids_col[blk.col.cid].points()
            h2.coupling_store[key] = kernel.coupling(xp[:, None, :], yp[None, :, :])
        h2.couplings.append((blk.row, blk.col, key))

    if not skeleton:
        for t in row_tree.leaves:
            h2.v_leaf[t.cid] = moment_block(row_basis, t.indices,
                                            grids_row[t.cid],
                                            ColumnVariant.VALUE, rule)
        for s in col_tree.leaves:
            h2.w_leaf[s.cid] = moment_block(col_basis, s.indices,
                                            grids_col[s.cid],
                                            column_variant, rule)

    for blk in block_tree.inadmissible_leaves:
        t, s = blk.row, blk.col
        mat = None if skeleton else galerkin_block(
            kernel, row_basis, t.indices, col_basis, s.indices, rule)
        h2.nearfield_index[(t.cid, s.cid)] = len(h2.nearfield)
        h2.nearfield.append((t, s, mat))
    return h2


def write_storage_csv(rows: list[dict], path) -> None:
    """Serialize storage reports, one row per (n, theta) configuration."""
    cols = ["n", "theta", "k", "lmax", "leaf_MB", "transfer_MB",
            "nearfield_MB", "coupling_MB"]
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(row[c]) for c in cols) + "\n")


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def storage_row(n: int, theta: int, report: StorageReport) -> dict:
    return {
        "n": n, "theta": theta, "k": report.k, "lmax": report.lmax,
        "leaf_MB": report.leaf_mb, "transfer_MB": report.transfer_mb,
        "nearfield_MB": report.nearfield_mb, "coupling_MB": report.coupling_mb,
    }
