"""Conjugate-gradient solve of the discretized Dirichlet problem and the
relative L2 error of the recovered Neumann trace.

The model problem takes boundary data from the harmonic point source
``u0 = 1/|x - y0|`` with y0 = (1.2, 1.2, 1.2) outside the unit sphere; its
exact Neumann trace is known, so the Galerkin solution can be measured in
L2 on the surface.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import BasisFamily, BasisKind, SurfaceMesh
from .quadkernel import QuadratureRule, linear_gram_matvec, triangle_quadrature


@dataclass(frozen=True)
class DirichletProblem:
    """Dirichlet data and exact Neumann trace of a point-source potential."""

    mesh: SurfaceMesh
    y0: np.ndarray

    def dirichlet(self, points: np.ndarray) -> np.ndarray:
        d = np.atleast_2d(points) - self.y0
        return 1.0 / np.linalg.norm(d, axis=-1)

    def neumann(self, points: np.ndarray, normals: np.ndarray) -> np.ndarray:
        """Exact normal derivative of the potential at surface points."""
        d = np.atleast_2d(points) - self.y0
        r = np.linalg.norm(d, axis=-1)
        return -np.einsum("...i,...i->...", d, np.atleast_2d(normals)) / r**3


def make_dirichlet_problem(mesh: SurfaceMesh, y0=(1.2, 1.2, 1.2)) -> DirichletProblem:
    return DirichletProblem(mesh, np.asarray(y0, dtype=float))


class ConvergenceError(RuntimeError):
    """CG failed to reach the requested tolerance; carries the residuals."""

    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = residuals


@dataclass
class CGInfo:
    iterations: int
    residuals: list[float] = field(default_factory=list)


def cg_solve(apply_a, rhs: np.ndarray, rel_tol: float = 1e-6,
             max_iter: int = 1000, x0: np.ndarray | None = None):
    """Unpreconditioned conjugate gradients for an SPD operator closure.

    Stops when ||rhs - A x|| <= rel_tol * ||rhs||; raises
    :class:`ConvergenceError` with the residual history otherwise.
    """
    rhs = np.asarray(rhs, dtype=float)
    x = np.zeros_like(rhs) if x0 is None else np.asarray(x0, dtype=float).copy()
    r = rhs - apply_a(x) if x0 is not None else rhs.copy()
    p = r.copy()
    rs = float(r @ r)
    norm_rhs = float(np.linalg.norm(rhs))
    if norm_rhs == 0.0:
        return x, CGInfo(0, [0.0])
    info = CGInfo(0, [np.sqrt(rs) / norm_rhs])
    if info.residuals[-1] <= rel_tol:
        return x, info
    for it in range(1, max_iter + 1):
        ap = apply_a(p)
        alpha = rs / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        rs_new = float(r @ r)
        info.iterations = it
        info.residuals.append(np.sqrt(rs_new) / norm_rhs)
        if info.residuals[-1] <= rel_tol:
            return x, info
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise ConvergenceError(
        f"cg did not reach {rel_tol} in {max_iter} iterations "
        f"(last residual {info.residuals[-1]:.3e})", info.residuals)


def project_dirichlet(basis: BasisFamily, problem: DirichletProblem,
                      mode: str = "interpolation",
                      rule: QuadratureRule | None = None,
                      gram_tol: float = 1e-12) -> np.ndarray:
    """Coefficients of the Dirichlet data in the linear basis.

    ``interpolation`` samples the data at the vertices; ``gram`` performs
    the exact L2-orthogonal projection by solving the linear-basis Gram
    system (the two differ at higher order than the Neumann error).
    """
    if basis.kind is not BasisKind.PIECEWISE_LINEAR:
        raise ValueError("Dirichlet data lives in the piecewise-linear family")
    mesh = basis.mesh
    nodal = problem.dirichlet(mesh.vertices)
    if mode == "interpolation":
        return nodal
    if mode != "gram":
        raise ValueError(f"unknown projection mode: {mode}")
    rule = rule or QuadratureRule(q_reg=4)
    tris = np.arange(mesh.num_triangles, dtype=np.int64)
    pts, wts, bary = triangle_quadrature(mesh, tris, rule)
    vals = problem.dirichlet(pts.reshape(-1, 3)).reshape(pts.shape[:2])
    rhs = np.zeros(mesh.num_vertices)
    contrib = np.einsum("tq,qs->ts", wts * vals, bary)
    np.add.at(rhs, mesh.triangles.reshape(-1), contrib.reshape(-1))
    sol, _ = cg_solve(lambda v: linear_gram_matvec(mesh, v), rhs,
                      rel_tol=gram_tol, max_iter=2000, x0=nodal)
    return sol


def neumann_l2_error(x: np.ndarray, problem: DirichletProblem,
                     rule: QuadratureRule | None = None) -> float:
    """Relative L2(Gamma) error of the piecewise-constant Neumann solution."""
    rule = rule or QuadratureRule(q_reg=4)
    mesh = problem.mesh
    tris = np.arange(mesh.num_triangles, dtype=np.int64)
    pts, wts, _ = triangle_quadrature(mesh, tris, rule)
    exact = problem.neumann(pts.reshape(-1, 3),
                            np.repeat(mesh.normals, pts.shape[1], axis=0))
    exact = exact.reshape(pts.shape[:2])
    diff2 = (exact - np.asarray(x)[:, None]) ** 2
    err = np.sqrt(np.sum(wts * diff2))
    ref = np.sqrt(np.sum(wts * exact**2))
    return float(err / ref)


def best_neumann_coefficients(problem: DirichletProblem,
                              rule: QuadratureRule | None = None) -> np.ndarray:
    """Per-triangle L2 projection of the exact Neumann trace (the
    best-approximation reference for the error functional)."""
    rule = rule or QuadratureRule(q_reg=4)
    mesh = problem.mesh
    tris = np.arange(mesh.num_triangles, dtype=np.int64)
    pts, wts, _ = triangle_quadrature(mesh, tris, rule)
    exact = problem.neumann(pts.reshape(-1, 3),
                            np.repeat(mesh.normals, pts.shape[1], axis=0))
    exact = exact.reshape(pts.shape[:2])
    return np.sum(wts * exact, axis=1) / np.sum(wts, axis=1)
