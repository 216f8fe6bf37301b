"""Acceptance suite: one test per numbered criterion.

Each test prints a PASS line with the measured quantities; run with
``pytest tests/test_acceptance.py -v -s`` to see them.  The heavy shared
computations (the solve ladder up to n = 8192 and the n = 2048 dense
oracle) live in module-scoped fixtures.
"""

import numpy as np
import pytest

from h2bem.h2core import (
    assemble_h2_conventional,
    build_uniform_h2,
    fold_mass_into_nearfield,
    level_grids,
    matvec,
    sample_coupling,
    sparsity_constants,
    storage_report,
)
from h2bem.interpolation import shift_grid
from h2bem.mesh import BasisKind, make_basis, make_sphere_mesh
from h2bem.quadkernel import (
    ColumnVariant,
    Kernel,
    KernelKind,
    QuadratureRule,
    dense_assemble,
    mass_matvec,
    moment_block,
)
from h2bem.solver import (
    cg_solve,
    make_dirichlet_problem,
    neumann_l2_error,
    project_dirichlet,
)

SLP = Kernel(KernelKind.SINGLE_LAYER_LAPLACE)
DLP = Kernel(KernelKind.DOUBLE_LAYER_LAPLACE)
RULE = QuadratureRule(q_reg=2, q_sing=4)
ETA = 2.0

#: (refinement level, scheduled interpolation degree); n = 8 * 4**level
LADDER = [(3, 2), (4, 3), (5, 4)]


def _constants(level):
    return make_basis(make_sphere_mesh(level), BasisKind.PIECEWISE_CONSTANT)


# ---------------------------------------------------------------------------
# criterion 1: deduplication count bounds
# ---------------------------------------------------------------------------

def test_criterion_1_dedup_count_bounds():
    for level, theta in LADDER:
        basis = _constants(level)
        h2 = build_uniform_h2(SLP, basis, basis, theta, ETA, rule=RULE,
                              skeleton=True)
        report = storage_report(h2)
        consts = sparsity_constants(h2.row_tree, h2.col_tree, ETA)
        for lev, count in report.row_transfer_keys_per_level.items():
            assert count <= 2, (basis.size, lev)
        for lev, count in report.col_transfer_keys_per_level.items():
            assert count <= 2, (basis.size, lev)
        for lev, count in report.coupling_keys_per_level.items():
            assert count <= 3 * consts["C_sp"], (basis.size, lev)
        adm_levels = {t.level for t, _, _ in h2.couplings}
        assert not adm_levels.intersection({0, 1, 2, 3})
        print(f"ACCEPTANCE 1 PASS: n={basis.size} transfer keys <= 2/level, "
              f"coupling keys/level <= {3 * consts['C_sp']:.0f} "
              f"(max seen {max(report.coupling_keys_per_level.values() or [0])}), "
              f"no admissible leaves on levels 0..3")


# ---------------------------------------------------------------------------
# criterion 2: exactness oracle on the all-nearfield case
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("theta", [1, 2, 4])
def test_criterion_2_exactness_oracle(theta, rng):
    basis = _constants(0)
    h2 = build_uniform_h2(SLP, basis, basis, theta, ETA, rule=RULE, lmax=3)
    assert len(h2.couplings) == 0
    dense = dense_assemble(SLP, basis, basis, RULE)
    worst = 0.0
    for _ in range(5):
        x = rng.standard_normal(8)
        ref = dense @ x
        worst = max(worst, np.linalg.norm(matvec(h2, x) - ref)
                    / np.linalg.norm(ref))
    assert worst <= 1e-14
    print(f"ACCEPTANCE 2 PASS: theta={theta} all-nearfield matvec matches "
          f"dense to {worst:.2e} (tol 1e-14)")


# ---------------------------------------------------------------------------
# criterion 3: farfield accuracy decays with the degree
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def dense_2048():
    basis = _constants(4)
    return basis, dense_assemble(SLP, basis, basis, RULE)


def test_criterion_3_farfield_accuracy(dense_2048, rng):
    """Fixed tree (lmax 6), degrees 2..5: the relative matvec error against
    the dense oracle must at least halve per unit degree."""
    basis, dense = dense_2048
    xs = rng.standard_normal((10, basis.size))
    xs /= np.linalg.norm(xs, axis=1, keepdims=True)
    refs = xs @ dense.T
    errors = []
    for theta in (2, 3, 4, 5):
        h2 = build_uniform_h2(SLP, basis, basis, theta, ETA, rule=RULE, lmax=6)
        err = max(np.linalg.norm(matvec(h2, x) - ref) / np.linalg.norm(ref)
                  for x, ref in zip(xs, refs))
        errors.append(err)
    for coarse, fine in zip(errors, errors[1:]):
        assert fine <= coarse / 2.0
    assert errors[2] <= 1e-4  # theta=4 regression bound
    print("ACCEPTANCE 3 PASS: n=2048 errors "
          + ", ".join(f"{e:.2e}" for e in errors)
          + f" (ratios {', '.join(f'{a / b:.1f}' for a, b in zip(errors, errors[1:]))})")


# ---------------------------------------------------------------------------
# criterion 4: nestedness of the cluster bases
# ---------------------------------------------------------------------------

def test_criterion_4_nestedness():
    mesh = make_sphere_mesh(3)
    constants = make_basis(mesh, BasisKind.PIECEWISE_CONSTANT)
    linears = make_basis(mesh, BasisKind.PIECEWISE_LINEAR)
    h2 = build_uniform_h2(DLP, constants, linears, theta=2, rule=RULE)
    worst = 0.0
    for tree, basis, store, key_of, variant in (
        (h2.row_tree, constants, h2.row_transfer, h2.row_key,
         ColumnVariant.VALUE),
        (h2.col_tree, linears, h2.col_transfer, h2.col_key,
         ColumnVariant.NORMAL_DERIVATIVE),
    ):
        grids = level_grids(tree, h2.theta)
        for lev in (tree.lmax - 2, tree.lmax - 1):
            for parent in tree.by_level[lev]:
                grid_p = shift_grid(grids[lev], tree.displacement_of(parent))
                vp = moment_block(basis, parent.indices, grid_p, variant, RULE)
                pos = {i: r for r, i in enumerate(parent.indices)}
                for son in parent.sons:
                    grid_s = shift_grid(grids[son.level],
                                        tree.displacement_of(son))
                    vs = moment_block(basis, son.indices, grid_s, variant, RULE)
                    rows = [pos[i] for i in son.indices]
                    num = np.linalg.norm(vp[rows] - vs @ store[key_of[son.cid]])
                    den = max(np.linalg.norm(vp[rows]), 1e-300)
                    worst = max(worst, num / den)
    assert worst <= 1e-10
    print(f"ACCEPTANCE 4 PASS: worst nestedness residual {worst:.2e} "
          f"(tol 1e-10), both cluster bases, last two levels")


# ---------------------------------------------------------------------------
# criterion 5: deduplication soundness
# ---------------------------------------------------------------------------

def test_criterion_5_dedup_soundness(rng):
    basis = _constants(3)
    h2 = build_uniform_h2(SLP, basis, basis, theta=2, rule=RULE)
    row_grids = level_grids(h2.row_tree, h2.theta)
    col_grids = level_grids(h2.col_tree, h2.theta)
    for idx in rng.choice(len(h2.couplings), 20, replace=False):
        t, s, key = h2.couplings[idx]
        fresh = sample_coupling(SLP, row_grids[t.level], col_grids[s.level],
                                h2.row_tree.levels[t.level].delta,
                                tuple(t.p - s.p))
        assert np.array_equal(fresh, h2.coupling_store[key])
    tree = h2.row_tree
    non_root = [c for c in tree.clusters if c.level > 0]
    for pick in rng.choice(len(non_root), 10, replace=False):
        son = non_root[pick]
        axis = tree.levels[son.level - 1].split_axis
        shift = np.zeros(3)
        shift[axis] = (son.p[axis] & 1) * tree.levels[son.level].delta[axis]
        fresh = row_grids[son.level - 1].eval(row_grids[son.level].points() + shift)
        assert np.array_equal(fresh, h2.row_transfer[h2.row_key[son.cid]])
    print("ACCEPTANCE 5 PASS: 20 coupling and 10 transfer matrices recomputed "
          "from their defining displacements are bit-identical to the store")


# ---------------------------------------------------------------------------
# criteria 6, 9, 10 share the full solve ladder
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def solve_ladder():
    rows = []
    for level, theta in LADDER:
        mesh = make_sphere_mesh(level)
        constants = make_basis(mesh, BasisKind.PIECEWISE_CONSTANT)
        linears = make_basis(mesh, BasisKind.PIECEWISE_LINEAR)
        g_h2 = build_uniform_h2(SLP, constants, constants, theta, ETA, rule=RULE)
        k_h2 = build_uniform_h2(DLP, constants, linears, theta, ETA, rule=RULE)
        fold_mass_into_nearfield(k_h2, 0.5)
        problem = make_dirichlet_problem(mesh)
        b = project_dirichlet(linears, problem, mode="gram")
        rhs = matvec(k_h2, b)

        ones = np.ones(linears.size)
        dlp_identity = (np.linalg.norm(matvec(k_h2, ones))
                        / np.linalg.norm(0.5 * mass_matvec(mesh, ones)))

        apply_g = lambda v: matvec(g_h2, v)
        x, info = cg_solve(apply_g, rhs, rel_tol=1e-6, max_iter=2000)
        _, info2 = cg_solve(apply_g, rhs, rel_tol=1e-6, max_iter=2000)
        rows.append({
            "n": constants.size,
            "theta": theta,
            "eps": neumann_l2_error(x, problem),
            "iterations": (info.iterations, info2.iterations),
            "residual": info.residuals[-1],
            "dlp_identity": dlp_identity,
        })
    return rows


def test_criterion_6_error_table_reproduction(solve_ladder):
    eps = {row["n"]: row["eps"] for row in solve_ladder}
    published = 1.878e-2
    assert published / 1.5 <= eps[8192] <= published * 1.5
    ratios = [eps[512] / eps[2048], eps[2048] / eps[8192]]
    for ratio in ratios:
        assert 1.7 <= ratio <= 2.3
    print(f"ACCEPTANCE 6 PASS: eps = {eps[512]:.3e} / {eps[2048]:.3e} / "
          f"{eps[8192]:.3e}; n=8192 within factor "
          f"{max(eps[8192] / published, published / eps[8192]):.2f} of the "
          f"published 1.878e-2; step ratios {ratios[0]:.2f}, {ratios[1]:.2f}")


# ---------------------------------------------------------------------------
# criterion 7: storage scaling of the deduplicated format
# ---------------------------------------------------------------------------

def test_criterion_7_storage_scaling():
    theta = 3
    k = (theta + 1) ** 3
    sizes, farfield, csp_max = [], [], 0.0
    for level in (3, 4, 5, 6):
        basis = _constants(level)
        h2 = build_uniform_h2(SLP, basis, basis, theta, ETA, rule=RULE,
                              skeleton=True)
        report = storage_report(h2)
        consts = sparsity_constants(h2.row_tree, h2.col_tree, ETA)
        csp_max = max(csp_max, consts["C_sp"])
        assert report.leaf_units == 2 * k * basis.size
        gamma = min(report.gamma_rows, report.gamma_cols)
        assert report.nearfield_units <= consts["C_sp"] * gamma * basis.size
        sizes.append(basis.size)
        farfield.append((report.coupling_units + report.transfer_units) / k**2)
    slope = np.polyfit(np.log2(sizes), farfield, 1)[0]
    bound = 3 * csp_max * 3 / 2 + 4
    assert 0.0 < slope <= bound
    print(f"ACCEPTANCE 7 PASS: leaf units = 2kn exactly; nearfield within the "
          f"sparsity bound; farfield/k^2 = {np.round(farfield, 1).tolist()} "
          f"over n = {sizes}, slope {slope:.1f} <= {bound:.0f}")


# ---------------------------------------------------------------------------
# criterion 8: conventional baseline comparison
# ---------------------------------------------------------------------------

def test_criterion_8_baseline_comparison(solve_ladder):
    theta = 3
    sizes = [2048, 8192, 32768, 131072]
    conv_units = {"leaf": [], "transfer": [], "nearfield": [], "coupling": []}
    ratios = []
    for n in sizes:
        level = int(np.log2(n / 8) / 2)
        basis = _constants(level)
        conv = storage_report(assemble_h2_conventional(
            SLP, basis, basis, theta, ETA, RULE, skeleton=True))
        conv_units["leaf"].append(conv.leaf_units)
        conv_units["transfer"].append(conv.transfer_units)
        conv_units["nearfield"].append(conv.nearfield_units)
        conv_units["coupling"].append(conv.coupling_units)
        if n <= 32768:
            dedup = storage_report(build_uniform_h2(
                SLP, basis, basis, theta, ETA, rule=RULE, skeleton=True))
            ratios.append(conv.coupling_units / dedup.coupling_units)
    slopes = {}
    for comp, units in conv_units.items():
        slopes[comp] = np.polyfit(np.log2(sizes), np.log2(units), 1)[0]
        assert 0.8 <= slopes[comp] <= 1.3, (comp, slopes[comp])
    assert all(a < b for a, b in zip(ratios, ratios[1:]))

    # accuracy stays comparable at desk scale: conventional within 10%
    mesh = make_sphere_mesh(3)
    constants = make_basis(mesh, BasisKind.PIECEWISE_CONSTANT)
    linears = make_basis(mesh, BasisKind.PIECEWISE_LINEAR)
    g_h2 = assemble_h2_conventional(SLP, constants, constants, 2, ETA, RULE)
    k_h2 = assemble_h2_conventional(DLP, constants, linears, 2, ETA, RULE,
                                    ColumnVariant.NORMAL_DERIVATIVE)
    fold_mass_into_nearfield(k_h2, 0.5)
    problem = make_dirichlet_problem(mesh)
    b = project_dirichlet(linears, problem, mode="gram")
    x, _ = cg_solve(lambda v: matvec(g_h2, v), matvec(k_h2, b), rel_tol=1e-6)
    eps_conv = neumann_l2_error(x, problem)
    eps_dedup = solve_ladder[0]["eps"]
    assert abs(eps_conv - eps_dedup) <= 0.1 * eps_dedup
    print(f"ACCEPTANCE 8 PASS: conventional unit slopes "
          + ", ".join(f"{c}={s:.2f}" for c, s in slopes.items())
          + f" (all in [0.8, 1.3]); coupling ratios conv/dedup "
          + ", ".join(f"{r:.2f}" for r in ratios)
          + f" strictly increasing; eps conventional {eps_conv:.3e} vs "
          f"dedup {eps_dedup:.3e} at n=512")


# ---------------------------------------------------------------------------
# criterion 9: double-layer potential-theory identity
# ---------------------------------------------------------------------------

def test_criterion_9_dlp_identity(solve_ladder):
    resid = {row["n"]: row["dlp_identity"] for row in solve_ladder}
    assert resid[2048] <= 0.05
    assert resid[512] > resid[2048] > resid[8192]
    print(f"ACCEPTANCE 9 PASS: |(K + M/2) 1| relative = {resid[512]:.2e} / "
          f"{resid[2048]:.2e} / {resid[8192]:.2e}, decreasing, "
          f"n=2048 value <= 0.05")


# ---------------------------------------------------------------------------
# criterion 10: CG convergence and stability
# ---------------------------------------------------------------------------

def test_criterion_10_cg(solve_ladder):
    for row in solve_ladder:
        assert row["residual"] <= 1e-6
        first, second = row["iterations"]
        assert abs(first - second) <= 2
    iters = {row["n"]: row["iterations"][0] for row in solve_ladder}
    print(f"ACCEPTANCE 10 PASS: CG reached 1e-6 on every ladder instance, "
          f"iterations {iters}, rerun counts within +-2")
