"""The correcting field V, its certificates, and the dbar solve.

V is the sum of branch-tracked logarithms of the summand products,
zeroed inside their discs/regions and mollified near the cuts.  Its
dbar data is compactly supported there, so the Cauchy area transform
gives a bounded symmetric solution v, and kappa = V - v is analytic.
"""

import numpy as np

from stabilize import (
    BlaschkeProduct,
    assemble_v,
    build_generations,
    make_corona_pair,
    make_kappa,
    solve_dbar,
    verify_dbar,
)
from stabilize.carleson import grid_carleson_intensity
from stabilize.fields import (
    build_summand_field,
    field_calculus,
    make_grid,
    sublevel_log_branch,
    summand_specs,
)
from stabilize.slits import build_slit_system

pair = make_corona_pair(BlaschkeProduct.from_zeros([1j, 3j]),
                        BlaschkeProduct.from_zeros([2j]), 0.1)
deco = build_generations(pair.f1, pair.f2, pair)
system = build_slit_system(deco, pair.f2, pair)
specs = summand_specs(system)
print("summands:", [s.label() for s in specs])

grid = make_grid(8.0, 256, 8.0)
fields = []
band = np.zeros(grid.shape, dtype=bool)
for spec in specs:
    V, info = build_summand_field(spec, grid, floor=4 * 16.0 / 512)
    fields.append(V)
    band |= info["band"]
    print("  %s: scaled sup|dbar| %.2f, symmetry defect %.1e"
          % (spec.label(), info["certificates"]["sup_dbar_scaled"],
             V.symmetry_defect()))

V = assemble_v(fields, grid)
print("sup |Re V| = %.3f" % np.abs(V.values.real).max())

calc = field_calculus(V)
area = grid.cell_area()
print("intensity of |lap V| Im z dxdy: %.3f"
      % grid_carleson_intensity(np.abs(calc["lap"].values) * grid.Y * area,
                                grid.x, grid.y))

# closeness: off the cuts, V is exactly a branch of log of the data
sign = pair.sign
branch, _ = sublevel_log_branch(lambda z: sign * pair.f1(z),
                                pair.f1.zeros, pair.f2,
                                pair.delta_prime, grid)
diff = np.abs((V.values - branch.values)[branch.mask])
print("sup |log p - V| on the sublevel set: %.4f" % diff.max())

sol = solve_dbar(V, band)
print("sup |v| = %.3f, dbar residual (relative) = %.2e"
      % (sol.sup_v, verify_dbar(sol, V, band)["max"]))

kappa, report = make_kappa(V, sol, band)
print("kappa: sup|Re| %.3f, sup|dbar| %.2e, symmetry %.1e"
      % (report["sup_re_kappa"], report["sup_dbar_kappa"],
         report["symmetry_defect"]))
