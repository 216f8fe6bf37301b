"""Admissibility on support bounding boxes and the block cluster tree.

A pair of same-level clusters is admissible when
``max(diam(B_t), diam(C_s)) <= eta * dist(B_t, C_s)``.  Diameters come from
the per-level support boxes (they are translation-invariant), distances
from exact per-axis interval gaps of the shifted boxes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .clustering import Cluster, ClusterTree


class BlockStatus(enum.Enum):
    ADMISSIBLE = "admissible"
    INADMISSIBLE = "inadmissible"
    SUBDIVIDED = "subdivided"


@dataclass
class Block:
    row: Cluster
    col: Cluster
    status: BlockStatus

    @property
    def level(self) -> int:
        return self.row.level


@dataclass
class BlockTree:
    """Block cluster tree with leaves split into admissible / inadmissible."""

    row_tree: ClusterTree
    col_tree: ClusterTree
    eta: float
    blocks: list[Block] = field(default_factory=list)
    admissible_leaves: list[Block] = field(default_factory=list)
    inadmissible_leaves: list[Block] = field(default_factory=list)

    @property
    def leaves(self) -> list[Block]:
        return self.admissible_leaves + self.inadmissible_leaves


def _box_gaps(lo_a, hi_a, lo_b, hi_b):
    return np.maximum(0.0, np.maximum(lo_b - hi_a, lo_a - hi_b))


def box_distance(row_tree: ClusterTree, t: Cluster,
                 col_tree: ClusterTree, s: Cluster) -> float:
    """Distance between the shifted support boxes of t and s."""
    bg = row_tree.levels[t.level].support_box
    cg = col_tree.levels[s.level].support_box
    mt = row_tree.displacement_of(t)
    ms = col_tree.displacement_of(s)
    gaps = _box_gaps(bg.lower + mt, bg.upper + mt, cg.lower + ms, cg.upper + ms)
    return float(np.linalg.norm(gaps))


def admissible(t: Cluster, s: Cluster, row_tree: ClusterTree,
               col_tree: ClusterTree, eta: float) -> bool:
    """Admissibility predicate max{diam B_t, diam C_s} <= eta dist(B_t, C_s)."""
    if t.level != s.level:
        raise ValueError("admissibility is defined for same-level clusters")
    diam = max(row_tree.levels[t.level].support_box.diameter,
               col_tree.levels[s.level].support_box.diameter)
    return diam <= eta * box_distance(row_tree, t, col_tree, s)


def build_block_tree(row_tree: ClusterTree, col_tree: ClusterTree,
                     eta: float) -> BlockTree:
    """Block cluster tree rooted at (root, root).

    Inadmissible pairs are subdivided into the product of the cluster sons
    until both clusters are leaves; since both trees are uniform of the
    same depth, every inadmissible leaf lives on the maximal level.
    """
    if eta <= 0.0:
        raise ValueError("eta must be positive")
    if row_tree.lmax != col_tree.lmax:
        raise ValueError("row and column trees have different depths")
    if not np.array_equal(row_tree.levels[0].ref_box.lower,
                          col_tree.levels[0].ref_box.lower):
        raise ValueError("row and column trees do not share the root box")
    for tree in (row_tree, col_tree):
        if any(geo.support_box is None for geo in tree.levels):
            raise ValueError("support boxes not computed")

    bt = BlockTree(row_tree, col_tree, float(eta))
    # cache per-level max diameters; they are level constants
    diam = [max(row_tree.levels[l].support_box.diameter,
                col_tree.levels[l].support_box.diameter)
            for l in range(row_tree.lmax + 1)]
    stack = [(row_tree.root, col_tree.root)]
    while stack:
        t, s = stack.pop()
        if diam[t.level] <= eta * box_distance(row_tree, t, col_tree, s):
            blk = Block(t, s, BlockStatus.ADMISSIBLE)
            bt.admissible_leaves.append(blk)
        elif t.is_leaf and s.is_leaf:
            blk = Block(t, s, BlockStatus.INADMISSIBLE)
            bt.inadmissible_leaves.append(blk)
        else:
            blk = Block(t, s, BlockStatus.SUBDIVIDED)
            for tt in t.sons:
                for ss in s.sons:
                    stack.append((tt, ss))
        bt.blocks.append(blk)
    return bt


def sparsity_report(block_tree: BlockTree):
    """Maximal number of block partners per cluster, overall and per level.

    Returns a dict with ``row_max``/``col_max`` (max over t of the number
    of s with (t, s) in the tree, and the transpose) plus per-level lists.
    """
    lmax = block_tree.row_tree.lmax
    row_counts = [dict() for _ in range(lmax + 1)]
    col_counts = [dict() for _ in range(lmax + 1)]
    for blk in block_tree.blocks:
        lev = blk.level
        row_counts[lev][blk.row.cid] = row_counts[lev].get(blk.row.cid, 0) + 1
        col_counts[lev][blk.col.cid] = col_counts[lev].get(blk.col.cid, 0) + 1
    row_per_level = [max(c.values()) if c else 0 for c in row_counts]
    col_per_level = [max(c.values()) if c else 0 for c in col_counts]
    return {
        "row_max": max(row_per_level),
        "col_max": max(col_per_level),
        "row_per_level": row_per_level,
        "col_per_level": col_per_level,
    }


def dump_leaves_csv(block_tree: BlockTree, path) -> None:
    """Debug CSV: one row per leaf block (level, p_t, p_s, admissible)."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("level,p_t,p_s,admissible\n")
        for blk in block_tree.leaves:
            pt = " ".join(str(v) for v in blk.row.p)
            ps = " ".join(str(v) for v in blk.col.p)
            adm = int(blk.status is BlockStatus.ADMISSIBLE)
            fh.write(f"{blk.level},{pt},{ps},{adm}\n")
