"""Uniform box cluster trees keyed by integer displacements.

Every cluster box on level ``l`` is the level's reference box translated by
an integer multiple of the level edge lengths: ``t = r(l) + delta(l) * p_t``.
The reference boxes come from the regular splitting sequence that halves
one axis per level, cycling through the axes.  Because only the split axis
is halved and the lower half is kept, the reference lower corner never
moves and all level edge lengths are exact binary fractions of the root
edge lengths; cluster box corners are therefore reproducible bit-for-bit
from ``(level, p)`` alone, which makes closed-box containment and the
displacement-based deduplication exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class AxisBox:
    """Closed axis-parallel box given by lower and upper corners."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=float))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=float))
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("invalid box corners")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.upper - self.lower))

    @property
    def volume(self) -> float:
        return float(np.prod(self.upper - self.lower))

    def contains(self, points: np.ndarray) -> np.ndarray:
        """Closed containment test for an (m, d) array of points."""
        pts = np.atleast_2d(points)
        return np.all((pts >= self.lower) & (pts <= self.upper), axis=1)

    def distance(self, other: "AxisBox") -> float:
        """Euclidean distance between two boxes (0 if they overlap)."""
        gaps = np.maximum(0.0, np.maximum(other.lower - self.upper,
                                          self.lower - other.upper))
        return float(np.linalg.norm(gaps))

    def shifted(self, m) -> "AxisBox":
        m = np.asarray(m, dtype=float)
        return AxisBox(self.lower + m, self.upper + m)


@dataclass
class LevelGeometry:
    """Per-level reference geometry and the level's support bounding box.

    ``split_axis`` is the 0-based axis halved when passing to the next
    level; it cycles 0, 1, ..., d-1.  ``support_box`` (the enlarged
    reference box) is filled in by :func:`compute_support_boxes`.
    """

    level: int
    ref_box: AxisBox
    delta: np.ndarray
    split_axis: int
    support_box: AxisBox | None = None


@dataclass
class Cluster:
    """Node of a cluster tree: a displaced reference box plus an index set."""

    level: int
    p: np.ndarray                 # integer displacement vector
    indices: np.ndarray           # sorted ids of characteristic points
    sons: tuple = ()
    cid: int = -1                 # position in the tree's cluster list

    @property
    def size(self) -> int:
        return len(self.indices)

    @property
    def is_leaf(self) -> bool:
        return len(self.sons) == 0


@dataclass
class ClusterTree:
    """Cluster tree for one point family over shared reference boxes.

    ``clusters`` lists nodes level by level (parents before sons);
    ``index_to_leaf`` maps every point id to the cid of its leaf.
    """

    root: Cluster
    levels: list[LevelGeometry]
    points: np.ndarray
    lmax: int
    clusters: list[Cluster] = field(default_factory=list)
    by_level: list[list[Cluster]] = field(default_factory=list)
    leaves: list[Cluster] = field(default_factory=list)
    index_to_leaf: np.ndarray = None
    basis: object = None

    @property
    def size(self) -> int:
        return len(self.points)

    def box_of(self, cluster: Cluster) -> AxisBox:
        """Canonical cluster box ``r(l) + delta(l) * p`` (bit-reproducible)."""
        geo = self.levels[cluster.level]
        lower = geo.ref_box.lower + geo.delta * cluster.p
        upper = geo.ref_box.lower + geo.delta * (cluster.p + 1)
        return AxisBox(lower, upper)

    def displacement_of(self, cluster: Cluster) -> np.ndarray:
        """Translation vector m_t = delta(l) * p_t."""
        return self.levels[cluster.level].delta * cluster.p

    def dump(self) -> str:
        """Indented text rendering: level, displacement, index count."""
        lines = []

        def visit(c, depth):
            lines.append("  " * depth + f"level={c.level} p={tuple(c.p)} n={c.size}")
            for s in c.sons:
                visit(s, depth + 1)

        visit(self.root, 0)
        return "\n".join(lines)


def compute_root_box(points_i: np.ndarray, points_j: np.ndarray) -> AxisBox:
    """Smallest axis-parallel box containing both characteristic point sets.

    The same root box is shared by the row and the column tree.
    """
    pts = [np.atleast_2d(p) for p in (points_i, points_j) if p is not None and len(p)]
    if not pts:
        raise ValueError("no characteristic points given")
    allpts = np.vstack(pts)
    return AxisBox(allpts.min(axis=0), allpts.max(axis=0))


def build_reference_levels(root_box: AxisBox, lmax: int) -> list[LevelGeometry]:
    """Reference boxes of the regular splitting sequence, levels 0..lmax.

    Axis ``l % d`` is halved when passing from level l to l+1 and the lower
    half is kept.  Degenerate axes of the root box are padded so that every
    edge length stays positive; the upper corner is nudged so the root box
    closes over its defining points in floating point.
    """
    if lmax < 0:
        raise ValueError("lmax must be nonnegative")
    lower = root_box.lower.copy()
    upper_target = root_box.upper.copy()
    d = len(lower)
    delta = upper_target - lower
    scale = max(np.abs(lower).max(), np.abs(upper_target).max(), 1.0)
    pad = np.finfo(float).eps * scale
    delta[delta <= 0.0] = pad
    # ensure lower + delta >= the true upper bound despite rounding
    for a in range(d):
        while lower[a] + delta[a] < upper_target[a]:
            delta[a] = np.nextafter(delta[a], np.inf)
    levels = []
    delta = delta.copy()
    for lev in range(lmax + 1):
        box = AxisBox(lower, lower + delta)
        levels.append(LevelGeometry(lev, box, delta.copy(), lev % d))
        delta = delta.copy()
        delta[lev % d] /= 2.0  # exact in binary floating point
    return levels


def choose_lmax(n_rows: int, n_cols: int, k: int, c_rk: float = 2.0, d: int = 3) -> int:
    """Maximal level: smallest multiple of d at least
    ``d/(d-1) * (min(log2 n_rows, log2 n_cols) - log2(c_rk * k))``,
    clamped to at least d."""
    if c_rk * k > min(n_rows, n_cols):
        raise ValueError("c_rk * k exceeds the smaller index set size")
    bound = d / (d - 1) * (math.log2(min(n_rows, n_cols)) - math.log2(c_rk * k))
    return max(d, d * math.ceil(bound / d))


def build_cluster_tree(points: np.ndarray, lmax: int,
                       levels: list[LevelGeometry]) -> ClusterTree:
    """Cluster tree over characteristic points, split to exact depth lmax.

    At each split, points with coordinate >= the midplane go to the upper
    son, unless all points lie in the lower half, in which case no upper
    son is created; empty sons are never stored.  The midplane threshold is
    evaluated with the same floating-point expression as the canonical box
    corners, so closed-box containment of each cluster's points is exact.
    """
    points = np.asarray(points, dtype=float)
    d = points.shape[1]
    root_geo = levels[0]
    if not np.all(AxisBox(root_geo.ref_box.lower,
                          root_geo.ref_box.lower + root_geo.delta).contains(points)):
        raise ValueError("point outside the root box")

    base = root_geo.ref_box.lower
    root = Cluster(0, np.zeros(d, dtype=np.int64),
                   np.arange(len(points), dtype=np.int64))
    tree = ClusterTree(root, levels, points, lmax)

    frontier = [root]
    tree.by_level = [[root]]
    for lev in range(lmax):
        axis = levels[lev].split_axis
        half = levels[lev + 1].delta[axis]
        nxt = []
        for cl in frontier:
            # threshold == upper corner of the lower son == lower corner of
            # the upper son, all three the same fp expression
            thr = base[axis] + half * (2 * cl.p[axis] + 1)
            coord = points[cl.indices, axis]
            sons = []
            if np.all(coord <= thr):
                p1 = cl.p.copy()
                p1[axis] *= 2
                sons.append(Cluster(lev + 1, p1, cl.indices))
            else:
                upper_mask = coord >= thr
                if np.any(~upper_mask):
                    p1 = cl.p.copy()
                    p1[axis] *= 2
                    sons.append(Cluster(lev + 1, p1, cl.indices[~upper_mask]))
                p2 = cl.p.copy()
                p2[axis] = 2 * p2[axis] + 1
                sons.append(Cluster(lev + 1, p2, cl.indices[upper_mask]))
            cl.sons = tuple(sons)
            nxt.extend(sons)
        tree.by_level.append(nxt)
        frontier = nxt

    cid = 0
    for level_nodes in tree.by_level:
        for cl in level_nodes:
            cl.cid = cid
            cid += 1
            tree.clusters.append(cl)
    tree.leaves = tree.by_level[lmax]
    tree.index_to_leaf = np.empty(len(points), dtype=np.int64)
    for leaf in tree.leaves:
        tree.index_to_leaf[leaf.indices] = leaf.cid
    return tree


def compute_support_boxes(tree: ClusterTree, basis) -> list[AxisBox]:
    """Per-level support bounding boxes.

    For each level, the smallest box containing the reference box together
    with every member support translated back by its cluster's
    displacement.  Supports are unions of flat triangles, so their vertex
    bounding boxes (precomputed on the basis family) determine the result.
    The boxes are stored on ``tree.levels[l].support_box`` and returned.
    """
    bounds = basis.support_bounds
    tree.basis = basis
    out = []
    for geo, nodes in zip(tree.levels, tree.by_level):
        lo = geo.ref_box.lower.copy()
        hi = geo.ref_box.upper.copy()
        for cl in nodes:
            m = geo.delta * cl.p
            np.minimum(lo, bounds[cl.indices, 0].min(axis=0) - m, out=lo)
            np.maximum(hi, bounds[cl.indices, 1].max(axis=0) - m, out=hi)
        geo.support_box = AxisBox(lo, hi)
        out.append(geo.support_box)
    return out
