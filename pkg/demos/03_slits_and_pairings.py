"""Slit systems: why the cuts exist and how odd objects get paired.

Each summand of the correcting field is a logarithm of a Blaschke
sub-product; the slits cut the half-plane so a single-valued branch
exists, and axis objects with an odd number of zeros are paired so each
sub-product is positive on the axis above and below its geometry.
"""

from stabilize import BlaschkeProduct, build_generations, make_corona_pair
from stabilize.slits import build_slit_system, neighborhood_census

# Two axis zeros below the sublevel interval of f2: they pair up, with
# a connector between the discs and a base slit down to the real line.
pair = make_corona_pair(BlaschkeProduct.from_zeros([1j, 1.5j]),
                        BlaschkeProduct.from_zeros([4j]), 0.2)
deco = build_generations(pair.f1, pair.f2, pair)
system = build_slit_system(deco, pair.f2, pair)
for p in system.pairings:
    print("pairing:", p.kind, "members:", p.members)
    for s in p.slits:
        print("   slit", s.kind, "segments", s.segments,
              "rank", s.rank, "origin", s.origin)

# Off-axis zeros pair with their mirrors; close to the axis the two
# discs merge into one centered on the axis.
for zeros in ([1 + 1j, -1 + 1j], [0.001 + 1j, -0.001 + 1j]):
    pr = make_corona_pair(BlaschkeProduct.from_zeros(zeros),
                          BlaschkeProduct.from_zeros([3j]), 0.2)
    dc = build_generations(pr.f1, pr.f2, pr)
    sy = build_slit_system(dc, pr.f2, pr)
    print(zeros, "->", [p.kind for p in sy.pairings])

# The census counts how many cut neighborhoods contain a point; far
# from the geometry everything is zero, and the counts stay bounded.
print("census far above:", neighborhood_census(100 + 100j, system))
probe = complex(0.5 * system.radius, 1.2)     # on the connector
print("census on the connector:", neighborhood_census(probe, system))
