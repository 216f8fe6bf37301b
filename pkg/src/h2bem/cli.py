"""Experiment driver: sphere meshes across refinements, parameter selection
by the resolution rule, the deduplicated and conventional pipelines, and
CSV reports of errors and per-component storage.

The solved problem is the interior Laplace Dirichlet problem on the unit
sphere: the single-layer system ``G x = (K + M/2) b`` with piecewise
constants for the Neumann trace and piecewise linears for the Dirichlet
data.  The interpolation degree grows by one whenever the triangle count
quadruples, anchored at theta = 4 for n = 8192.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .clustering import choose_lmax
from .h2core import (
    assemble_h2_conventional,
    build_uniform_h2,
    fold_mass_into_nearfield,
    matvec,
    storage_report,
    storage_row,
    write_storage_csv,
)
from .mesh import BasisKind, make_basis, make_sphere_mesh
from .quadkernel import ColumnVariant, Kernel, KernelKind, QuadratureRule
from .solver import cg_solve, make_dirichlet_problem, neumann_l2_error, project_dirichlet


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Validated experiment parameters.

    ``theta_base`` is the interpolation degree used at the first
    refinement; by default it follows the quadrupling schedule anchored at
    (n = 8192, theta = 4), i.e. theta = refinement_level - 1.
    """

    refinements: list[int] = field(default_factory=lambda: [3])
    theta_base: int | None = None
    eta: float = 2.0
    crk: float = 2.0
    kernel: str = "both"           # which storage tables to emit
    variant: str = "dedup"
    rel_tol: float = 1e-6
    gram_projection: bool = False
    out_dir: str = "results"
    seed: int = 0
    q_reg: int = 2
    q_sing: int = 4
    max_iter: int = 2000

    def theta_for(self, refinement: int) -> int:
        base = self.theta_base
        if base is None:
            base = self.refinements[0] - 1
        return base + (refinement - self.refinements[0])

    def validate(self) -> None:
        if not self.refinements:
            raise ConfigError("refinements: list must not be empty")
        if sorted(self.refinements) != list(self.refinements):
            raise ConfigError("refinements: must be sorted ascending")
        if min(self.refinements) < 0 or max(self.refinements) > 10:
            raise ConfigError("refinements: each level must be in 0..10")
        if self.eta <= 0.0:
            raise ConfigError("eta: must be positive")
        if self.crk <= 0.0:
            raise ConfigError("crk: must be positive")
        if not 0.0 < self.rel_tol < 1.0:
            raise ConfigError("rel_tol: must lie in (0, 1)")
        if self.kernel not in ("slp", "dlp", "both"):
            raise ConfigError("kernel: must be slp, dlp, or both")
        if self.variant not in ("dedup", "conventional", "both"):
            raise ConfigError("variant: must be dedup, conventional, or both")
        if self.q_reg < 1 or self.q_sing < 1:
            raise ConfigError("q_reg/q_sing: must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter: must be positive")
        for r in self.refinements:
            if self.theta_for(r) < 1:
                raise ConfigError(
                    f"theta_base: schedule gives theta < 1 at refinement {r}")


def run_dirichlet_case(refinement: int, theta: int, config: ExperimentConfig,
                       variant: str) -> dict:
    """Assemble both operators, solve the Dirichlet system, measure the
    error; returns the results row plus the two storage reports."""
    mesh = make_sphere_mesh(refinement)
    constants = make_basis(mesh, BasisKind.PIECEWISE_CONSTANT)
    linears = make_basis(mesh, BasisKind.PIECEWISE_LINEAR)
    rule = QuadratureRule(config.q_reg, config.q_sing)
    slp = Kernel(KernelKind.SINGLE_LAYER_LAPLACE)
    dlp = Kernel(KernelKind.DOUBLE_LAYER_LAPLACE)
    d = 3
    k = (theta + 1) ** d
    lmax_ii = choose_lmax(constants.size, constants.size, k, config.crk, d)
    lmax_ij = choose_lmax(constants.size, linears.size, k, config.crk, d)

    if variant == "dedup":
        g_h2 = build_uniform_h2(slp, constants, constants, theta, config.eta,
                                config.crk, rule)
        k_h2 = build_uniform_h2(dlp, constants, linears, theta, config.eta,
                                config.crk, rule)
    else:
        g_h2 = assemble_h2_conventional(slp, constants, constants, theta,
                                        config.eta, rule)
        k_h2 = assemble_h2_conventional(dlp, constants, linears, theta,
                                        config.eta, rule,
                                        ColumnVariant.NORMAL_DERIVATIVE)
    g_report = storage_report(g_h2)
    k_report = storage_report(k_h2)

    problem = make_dirichlet_problem(mesh)
    mode = "gram" if config.gram_projection else "interpolation"
    b = project_dirichlet(linears, problem, mode=mode)
    fold_mass_into_nearfield(k_h2, 0.5)
    rhs = matvec(k_h2, b)
    x, info = cg_solve(lambda v: matvec(g_h2, v), rhs,
                       rel_tol=config.rel_tol, max_iter=config.max_iter)
    eps = neumann_l2_error(x, problem)
    return {
        "variant": variant,
        "n": mesh.num_triangles,
        "theta": theta,
        "k": k,
        "lmax_II": lmax_ii if variant == "dedup" else g_h2.row_tree.lmax,
        "lmax_IJ": lmax_ij if variant == "dedup" else k_h2.row_tree.lmax,
        "eps_l2": eps,
        "cg_iterations": info.iterations,
        "slp_report": g_report,
        "dlp_report": k_report,
    }


def _write_results_csv(rows: list[dict], path: Path) -> None:
    cols = ["variant", "n", "theta", "k", "lmax_II", "lmax_IJ",
            "eps_l2", "cg_iterations"]
    with open(path, "w", encoding="ascii") as fh:
        fh.write(",".join(cols) + "\n")
        for row in rows:
            out = []
            for c in cols:
                v = row[c]
                out.append(f"{v:.6e}" if isinstance(v, float) else str(v))
            fh.write(",".join(out) + "\n")


def run_experiment(config: ExperimentConfig) -> dict:
    """Run the configured ladder and write the CSV reports.

    Produces ``results.csv`` (parameters and errors; byte-stable across
    reruns), ``timings.csv`` (wall times, excluded from the deterministic
    set), storage tables per operator and variant, and, when both variants
    run, the conventional/dedup ratio table.
    """
    config.validate()
    np.random.default_rng(config.seed)  # reserved for randomized probes
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    variants = [config.variant] if config.variant != "both" else \
        ["dedup", "conventional"]
    kernels = [config.kernel] if config.kernel != "both" else ["slp", "dlp"]

    result_rows: list[dict] = []
    timing_rows: list[dict] = []
    storage: dict[tuple[str, str], list[dict]] = {
        (kn, var): [] for kn in kernels for var in variants}
    for refinement in config.refinements:
        theta = config.theta_for(refinement)
        for variant in variants:
            t0 = time.perf_counter()
            row = run_dirichlet_case(refinement, theta, config, variant)
            elapsed = time.perf_counter() - t0
            result_rows.append(row)
            timing_rows.append({"variant": variant, "n": row["n"],
                                "seconds": elapsed})
            for kn in kernels:
                rep = row["slp_report"] if kn == "slp" else row["dlp_report"]
                storage[(kn, variant)].append(storage_row(row["n"], theta, rep))

    _write_results_csv(result_rows, out_dir / "results.csv")
    with open(out_dir / "timings.csv", "w", encoding="ascii") as fh:
        fh.write("variant,n,seconds\n")
        for row in timing_rows:
            fh.write(f"{row['variant']},{row['n']},{row['seconds']:.3f}\n")
    paths = {}
    for (kn, var), rows in storage.items():
        path = out_dir / f"storage_{kn}_{var}.csv"
        write_storage_csv(rows, path)
        paths[(kn, var)] = path
    if len(variants) == 2:
        for kn in kernels:
            compare_reports(paths[(kn, "dedup")], paths[(kn, "conventional")],
                            out_dir / f"ratios_{kn}.csv")
    return {"results": result_rows, "out_dir": out_dir}


def compare_reports(dedup_csv, conventional_csv, out_csv=None) -> list[dict]:
    """Per-n conventional/dedup storage ratios for transfer and coupling."""

    def read(path):
        with open(path, encoding="ascii") as fh:
            return {int(row["n"]): row for row in csv.DictReader(fh)}

    dedup = read(dedup_csv)
    conv = read(conventional_csv)
    if sorted(dedup) != sorted(conv):
        raise ValueError("reports do not cover the same n values")
    rows = []
    for n in sorted(dedup):
        rows.append({
            "n": n,
            "transfer_ratio":
                float(conv[n]["transfer_MB"]) / float(dedup[n]["transfer_MB"]),
            "coupling_ratio":
                float(conv[n]["coupling_MB"]) / float(dedup[n]["coupling_MB"]),
        })
    if out_csv is not None:
        with open(out_csv, "w", encoding="ascii") as fh:
            fh.write("n,transfer_ratio,coupling_ratio\n")
            for row in rows:
                fh.write(f"{row['n']},{row['transfer_ratio']:.6f},"
                         f"{row['coupling_ratio']:.6f}\n")
    return rows


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="h2bem",
        description="Dirichlet-problem experiment with compressed BEM matrices")
    parser.add_argument("--refinements", type=int, nargs="+", default=[3],
                        help="sphere refinement levels (n = 8 * 4**level)")
    parser.add_argument("--theta-base", type=int, default=None,
                        help="interpolation degree at the first refinement")
    parser.add_argument("--eta", type=float, default=2.0)
    parser.add_argument("--crk", type=float, default=2.0)
    parser.add_argument("--kernel", choices=["slp", "dlp", "both"],
                        default="both")
    parser.add_argument("--variant", choices=["dedup", "conventional", "both"],
                        default="dedup")
    parser.add_argument("--rel-tol", type=float, default=1e-6)
    parser.add_argument("--gram-projection", action="store_true")
    parser.add_argument("--out-dir", default="results")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    config = ExperimentConfig(
        refinements=args.refinements, theta_base=args.theta_base,
        eta=args.eta, crk=args.crk, kernel=args.kernel, variant=args.variant,
        rel_tol=args.rel_tol, gram_projection=args.gram_projection,
        out_dir=args.out_dir, seed=args.seed)
    try:
        summary = run_experiment(config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # convergence or assembly failure
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for row in summary["results"]:
        print(f"{row['variant']:>12}  n={row['n']:>7}  theta={row['theta']}  "
              f"eps_l2={row['eps_l2']:.3e}  cg={row['cg_iterations']}")
    print(f"reports written to {summary['out_dir']}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
