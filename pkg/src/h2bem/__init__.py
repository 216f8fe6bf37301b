"""Translation-invariant H2-matrix compression for Galerkin BEM matrices.

The package builds uniform box cluster trees keyed by integer displacements,
per-level support bounding boxes, tensor Chebyshev interpolants, and
H2-matrices whose transfer and coupling matrices are deduplicated across
translated box pairs.  A Laplace Dirichlet solver and an experiment driver
sit on top.
"""

from .mesh import (
    BasisFamily,
    BasisKind,
    SurfaceMesh,
    evaluate_basis,
    load_mesh,
    make_basis,
    make_sphere_mesh,
    save_mesh,
)
from .clustering import (
    AxisBox,
    Cluster,
    ClusterTree,
    LevelGeometry,
    build_cluster_tree,
    build_reference_levels,
    choose_lmax,
    compute_root_box,
    compute_support_boxes,
)
from .interpolation import TensorGrid, chebyshev_nodes_1d, lagrange_eval, shift_grid
from .blocktree import Block, BlockStatus, BlockTree, admissible, build_block_tree, sparsity_report
from .quadkernel import (
    ColumnVariant,
    Kernel,
    KernelKind,
    QuadratureRule,
    dense_assemble,
    entry,
    mass_entry,
    mass_matvec,
    moment,
)
from .h2core import (
    H2Matrix,
    StorageReport,
    assemble_h2,
    assemble_h2_conventional,
    build_uniform_h2,
    fold_mass_into_nearfield,
    level_grids,
    matvec,
    sparsity_constants,
    storage_report,
)
from .solver import (
    DirichletProblem,
    cg_solve,
    make_dirichlet_problem,
    neumann_l2_error,
    project_dirichlet,
)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
