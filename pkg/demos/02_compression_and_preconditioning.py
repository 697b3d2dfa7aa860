"""Skeletonization: trading accuracy for memory, and preconditioned CG.

The compressed factorization skeletonizes every separator edge after each
round of interior elimination, at a chosen interpolative-decomposition
tolerance eps. Loose tolerances give small factors that still make
excellent CG preconditioners; tight tolerances approach a direct solver.
"""

import numpy as np

from hifde import (assemble, build_grid, constant_field, estimate_apply_error,
                   factor_hifde, factor_mf, pcg)

grid = build_grid(dim=2, n=256, m=4)
field = constant_field(grid, 1.0, 0.0)
b = np.random.default_rng(1).random(grid.ndof)

print(f"{grid.ndof} unknowns\n")
print(f"{'solver':>14} {'top block':>9} {'MB':>7} {'e_a':>9} {'CG its':>6}")

a_csr = assemble(grid, field).to_scipy()
mf = factor_mf(assemble(grid, field), grid)
rep = pcg(a_csr, b, mf.apply_inverse, tol=1e-12)
print(f"{'exact':>14} {mf.metrics['s_top']:>9} "
      f"{mf.metrics['m_f_bytes'] / 1e6:>7.1f} {'--':>9} {rep.n_i:>6}")

for eps in (1e-3, 1e-6, 1e-9):
    f = factor_hifde(assemble(grid, field), grid, eps)
    e_a = estimate_apply_error(a_csr, f).value
    rep = pcg(a_csr, b, f.apply_inverse, tol=1e-12)
    print(f"{'eps=%.0e' % eps:>14} {f.metrics['s_top']:>9} "
          f"{f.metrics['m_f_bytes'] / 1e6:>7.1f} {e_a:>9.1e} {rep.n_i:>6}")

print("\nThe top separator block stays O(100) DOFs under compression "
      "instead of growing with n, which is what flattens the cost curve.")
