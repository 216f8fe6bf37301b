"""How the four storage components scale with the problem size.

Uses skeleton assemblies (keys and shapes only, no quadrature) to count
storage units across a refinement ladder at fixed interpolation degree.
Leaf and nearfield storage grow linearly in n for both variants; the
deduplicated transfer and coupling stores grow only with the tree depth,
while the conventional baseline pays O(n k) for them.

Run:  python3 demos/storage_scaling.py
"""

import numpy as np

from h2bem import (
    BasisKind,
    Kernel,
    KernelKind,
    QuadratureRule,
    assemble_h2_conventional,
    build_uniform_h2,
    make_basis,
    make_sphere_mesh,
    storage_report,
)

kernel = Kernel(KernelKind.SINGLE_LAYER_LAPLACE)
rule = QuadratureRule()
theta = 3

print(f"degree {theta}, rank k = {(theta + 1) ** 3}")
header = (f"{'n':>7} {'variant':>13} {'leaf MB':>9} {'transfer MB':>12} "
          f"{'nearfield MB':>13} {'coupling MB':>12}")
print(header)
rows = {}
for level in (4, 5, 6):
    basis = make_basis(make_sphere_mesh(level), BasisKind.PIECEWISE_CONSTANT)
    n = basis.size
    dedup = storage_report(build_uniform_h2(kernel, basis, basis, theta,
                                            rule=rule, skeleton=True))
    conv = storage_report(assemble_h2_conventional(kernel, basis, basis, theta,
                                                   2.0, rule, skeleton=True))
    rows[n] = (dedup, conv)
    for name, rep in (("dedup", dedup), ("conventional", conv)):
        print(f"{n:>7} {name:>13} {rep.leaf_mb:>9.3f} {rep.transfer_mb:>12.3f} "
              f"{rep.nearfield_mb:>13.3f} {rep.coupling_mb:>12.3f}")

print("\nconventional / dedup ratios (farfield components):")
print(f"{'n':>7} {'transfer':>9} {'coupling':>9}")
for n, (dedup, conv) in sorted(rows.items()):
    print(f"{n:>7} {conv.transfer_units / dedup.transfer_units:>9.2f} "
          f"{conv.coupling_units / max(dedup.coupling_units, 1):>9.2f}")

ns = np.array(sorted(rows))
for comp in ("leaf_units", "nearfield_units"):
    units = np.array([getattr(rows[n][0], comp) for n in ns])
    slope = np.polyfit(np.log2(ns), np.log2(units), 1)[0]
    print(f"\ndedup {comp} log-log slope vs n: {slope:.2f} (linear growth ~ 1)")
farf = np.array([rows[n][0].transfer_units + rows[n][0].coupling_units
                 for n in ns])
print("dedup farfield units per k^2 vs log2 n:",
      np.round(farf / (theta + 1) ** 6, 1))
