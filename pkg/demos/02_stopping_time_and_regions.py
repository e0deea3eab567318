"""The symmetric stopping-time decomposition and Carleson intensities.

Low-degree data never accumulates enough zero mass to trigger the
stopping criterion (every zero stays residual); a dense synthetic
cluster shows the interval generations and comb regions at work.
"""

import math

import numpy as np

from stabilize import (
    BlaschkeProduct,
    CarlesonSquare,
    PointMassMeasure,
    build_generations,
    carleson_intensity,
    make_corona_pair,
    region_boundary_length,
    stopping_intervals,
)
from stabilize.blaschke import CoronaPair, corona_delta, axis_sign_condition

# Point-mass intensity: sup over squares Q(I) of mass(Q(I)) / |I|.
m = PointMassMeasure(((1j, 1.0), (2j, 2.0)))
print("intensity of atoms at i and 2i:", carleson_intensity(m))   # 3/2

# The stopping selection picks maximal dyadic intervals whose tripled
# square holds zero mass at least M per unit length.
zs = [complex(x, 0.5) for x in np.linspace(-0.4, 0.4, 80)]
B = BlaschkeProduct(tuple(zs))
picked = stopping_intervals(B, CarlesonSquare(-8, 8), 10.0, 0.01)
print("selected intervals at M=10:", picked)

# A sparse pair: the decomposition is trivial, all zeros residual.
pair = make_corona_pair(BlaschkeProduct.from_zeros([1j, 3j]),
                        BlaschkeProduct.from_zeros([2j]), 0.1)
deco = build_generations(pair.f1, pair.f2, pair)
print("sparse data: generations=%d, residual zeros=%s"
      % (len(deco.generations), deco.sigma1))

# A dense cluster in the regime where the sublevel property is a
# theorem (M above ~28 log(1/delta')).
xs = np.linspace(0.005, 0.495, 110)
zeros = [complex(x, 0.5) for x in xs] + [complex(-x, 0.5) for x in xs] \
    + [1.5j]
p = BlaschkeProduct.from_zeros(zeros)
q = BlaschkeProduct.from_zeros([256j])
d = corona_delta(p, q, resolution=128)
dp = min(d, 0.2) / 10
pair = CoronaPair(p, q, d, 0.2, dp, axis_sign_condition(p, q, 0.2).sign)
deco = build_generations(p, q, pair, M=28.5 * math.log(1.0 / dp))
print("dense data: generation-1 intervals:",
      [tuple(round(v, 3) for v in t) for t in deco.generations[0].intervals])
for comp in deco.components:
    print("  component %d: %d regions, %d zeros, self-symmetric=%s, "
          "axis span=%s" % (comp.index, len(comp.regions), len(comp.zeros),
                            comp.self_symmetric, comp.axis_interval()))
print("  residual zeros:", deco.sigma1)
print("  sampled sublevel property holds:", deco.meta["sublevel_property"])

arc_measure, per_comp = region_boundary_length(deco)
print("  boundary length per component:",
      {k: round(v, 3) for k, v in per_comp.items()})
print("  boundary arc-length intensity: %.3f"
      % carleson_intensity(arc_measure, sweep=48))
