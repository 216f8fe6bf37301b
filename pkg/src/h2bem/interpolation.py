"""Tensor Chebyshev interpolation on axis-parallel boxes.

One-dimensional nodes are Chebyshev points of the first kind (roots),
mapped affinely onto each box edge; tensor points are all d-fold
combinations, ``k = (theta + 1)**d`` in total.  Lagrange polynomials are
evaluated in the second barycentric form with precomputed weights, which
is stable for the degrees used here and reproduces the cardinal property
exactly at the nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .clustering import AxisBox


def chebyshev_nodes_1d(theta: int, a: float, b: float) -> np.ndarray:
    """Chebyshev root nodes ``cos(pi (2 nu + 1) / (2 theta + 2))`` on [a, b].

    Strictly inside the interval and symmetric about the midpoint; ordering
    follows nu = 0..theta (descending coordinate).
    """
    if a > b:
        raise ValueError("interval endpoints out of order")
    nu = np.arange(theta + 1)
    ref = np.cos(np.pi * (2 * nu + 1) / (2 * theta + 2))
    return 0.5 * (a + b) + 0.5 * (b - a) * ref


def _barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    diff = nodes[:, None] - nodes[None, :]
    np.fill_diagonal(diff, 1.0)
    w = 1.0 / diff.prod(axis=1)
    return w / np.abs(w).max()


def _eval_1d(nodes, weights, x, deriv=False):
    """Values (and optionally derivatives) of all 1-D Lagrange basis polys.

    Returns (m, theta+1) arrays.  Exact node hits are resolved through the
    cardinal property / differentiation-matrix formulas.
    """
    x = np.asarray(x, dtype=float)
    if len(nodes) == 1:
        vals = np.ones((len(x), 1))
        return (vals, np.zeros_like(vals)) if deriv else vals
    diff = x[:, None] - nodes[None, :]
    hits = diff == 0.0
    hit_rows = np.nonzero(hits.any(axis=1))[0]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = weights / diff
        ssum = terms.sum(axis=1, keepdims=True)
        vals = terms / ssum
        if deriv:
            s2 = (terms / diff).sum(axis=1, keepdims=True)
            dvals = vals * (s2 / ssum - 1.0 / diff)
    for r in hit_rows:
        j = int(np.nonzero(hits[r])[0][0])
        vals[r] = 0.0
        vals[r, j] = 1.0
        if deriv:
            row = np.zeros(len(nodes))
            others = np.arange(len(nodes)) != j
            row[others] = (weights[others] / weights[j]) / (nodes[j] - nodes[others])
            row[j] = -row[others].sum()
            dvals[r] = row
    return (vals, dvals) if deriv else vals


@dataclass(frozen=True)
class TensorGrid:
    """Tensor Chebyshev interpolation grid of degree theta on a box.

    Multi-indices nu in {0..theta}^d are flattened in C order, so the flat
    index of (nu_1, ..., nu_d) is ``nu_1*(theta+1)**(d-1) + ... + nu_d``.
    """

    theta: int
    box: AxisBox
    nodes: np.ndarray = field(default=None, repr=False)      # (d, theta+1)
    weights: np.ndarray = field(default=None, repr=False)    # (d, theta+1)

    def __post_init__(self):
        if self.nodes is None:
            lo, hi = self.box.lower, self.box.upper
            nodes = np.stack(
                [chebyshev_nodes_1d(self.theta, lo[a], hi[a]) for a in range(len(lo))]
            )
            object.__setattr__(self, "nodes", nodes)
        if self.weights is None:
            w = np.stack([_barycentric_weights(row) for row in self.nodes])
            object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return len(self.box.lower)

    @property
    def size(self) -> int:
        return (self.theta + 1) ** self.dim

    def points(self) -> np.ndarray:
        """All tensor interpolation points, shape (k, d), C-ordered."""
        grids = np.meshgrid(*self.nodes, indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=-1)

    def eval(self, x: np.ndarray) -> np.ndarray:
        """Evaluate all k tensor Lagrange polynomials at points x (m, d)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        per_axis = [_eval_1d(self.nodes[a], self.weights[a], x[:, a])
                    for a in range(self.dim)]
        acc = per_axis[0]
        for la in per_axis[1:]:
            acc = (acc[:, :, None] * la[:, None, :]).reshape(len(x), -1)
        return acc

    def eval_grad(self, x: np.ndarray):
        """Values (m, k) and gradients (m, k, d) of all Lagrange polynomials."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        vals, ders = [], []
        for a in range(self.dim):
            v, dv = _eval_1d(self.nodes[a], self.weights[a], x[:, a], deriv=True)
            vals.append(v)
            ders.append(dv)

        def tensor(factors):
            acc = factors[0]
            for fa in factors[1:]:
                acc = (acc[:, :, None] * fa[:, None, :]).reshape(len(x), -1)
            return acc

        value = tensor(vals)
        grad = np.empty(value.shape + (self.dim,))
        for a in range(self.dim):
            grad[:, :, a] = tensor([ders[b] if b == a else vals[b]
                                    for b in range(self.dim)])
        return value, grad


def lagrange_eval(grid: TensorGrid, nu, x) -> float:
    """Value of the tensor Lagrange polynomial with multi-index nu at x."""
    nu = np.atleast_1d(np.asarray(nu, dtype=np.int64))
    flat = 0
    for a in range(grid.dim):
        flat = flat * (grid.theta + 1) + int(nu[a])
    return float(grid.eval(np.asarray(x, dtype=float)[None, :])[0, flat])


def shift_grid(grid: TensorGrid, m) -> TensorGrid:
    """Translate a grid by m; barycentric weights are translation-invariant."""
    m = np.asarray(m, dtype=float)
    box = AxisBox(grid.box.lower + m, grid.box.upper + m)
    return TensorGrid(grid.theta, box, grid.nodes + m[:, None], grid.weights)
