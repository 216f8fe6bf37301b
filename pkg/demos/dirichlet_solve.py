"""Solve the Laplace Dirichlet problem on the unit sphere at desk scale.

Boundary data comes from a harmonic point source outside the sphere; the
single-layer system G x = (K + M/2) b is solved with CG on the compressed
operators and the recovered Neumann trace is compared with its exact
value.  The error table shows the first-order convergence as the mesh is
refined and the interpolation degree follows the quadrupling schedule.

Run:  python3 demos/dirichlet_solve.py          (about a minute)
"""

import time

from h2bem import (
    BasisKind,
    Kernel,
    KernelKind,
    QuadratureRule,
    build_uniform_h2,
    cg_solve,
    fold_mass_into_nearfield,
    make_basis,
    make_dirichlet_problem,
    make_sphere_mesh,
    matvec,
    neumann_l2_error,
    project_dirichlet,
)

rule = QuadratureRule(q_reg=2, q_sing=4)
slp = Kernel(KernelKind.SINGLE_LAYER_LAPLACE)
dlp = Kernel(KernelKind.DOUBLE_LAYER_LAPLACE)

print(f"{'n':>6} {'theta':>5} {'k':>5} {'eps_L2':>12} {'cg':>4} {'seconds':>8}")
previous = None
for level, theta in ((2, 2), (3, 2), (4, 3)):
    t0 = time.time()
    mesh = make_sphere_mesh(level)
    constants = make_basis(mesh, BasisKind.PIECEWISE_CONSTANT)
    linears = make_basis(mesh, BasisKind.PIECEWISE_LINEAR)
    g_mat = build_uniform_h2(slp, constants, constants, theta, rule=rule)
    k_mat = build_uniform_h2(dlp, constants, linears, theta, rule=rule)
    fold_mass_into_nearfield(k_mat, 0.5)

    problem = make_dirichlet_problem(mesh)
    b = project_dirichlet(linears, problem, mode="gram")
    x, info = cg_solve(lambda v: matvec(g_mat, v), matvec(k_mat, b),
                       rel_tol=1e-6)
    eps = neumann_l2_error(x, problem)
    note = "" if previous is None else f"   ratio {previous / eps:.2f}"
    print(f"{mesh.num_triangles:>6} {theta:>5} {(theta + 1) ** 3:>5} "
          f"{eps:>12.4e} {info.iterations:>4} {time.time() - t0:>8.1f}{note}")
    previous = eps
