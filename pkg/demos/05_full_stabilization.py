"""End to end: an invertible corona solution and its certificates.

Given f1, f2 with positive corona infimum and the single-sign condition,
the pipeline builds g1 = exp(-(kappa + h)) (zero-free by construction)
and g2 with f1 g1 + f2 g2 = 1, plus the independent polynomial
certificate of unimodularity.
"""

import numpy as np

from stabilize import BlaschkeProduct, bezout_oracle, run_pipeline

f1 = BlaschkeProduct.from_zeros([0.5j, 0.9j, 1.2 + 0.6j, -1.2 + 0.6j])
f2 = BlaschkeProduct.from_zeros([2.2j, 1.5 + 2.5j, -1.5 + 2.5j])

report, artifacts = run_pipeline(f1, f2, 0.1, resolution=256,
                                 keep_fields=True)
print("status      :", report.status)
print("delta       : %.5f" % report.delta)
print("delta_prime : %.5f" % report.delta_prime)
print("residual    : %.2e" % report.residual)
print("norms       :", {k: round(v, 2) for k, v in report.norms.items()})
d = report.diagnostics
print("sup|Re V|   : %.3f" % d["sup_re_v"])
print("sup|v|      : %.3f" % d["dbar"]["sup_v"])
print("|dbar kappa|: %.2e" % d["kappa"]["sup_dbar_kappa"])
print("interp rho  : %.3f over %d nodes"
      % (d["interpolation"]["rho"], d["interpolation"]["n_nodes"]))

# spot check the identity with the returned evaluators
g1, g2 = artifacts["g1"], artifacts["g2"]
rng = np.random.default_rng(0)
z = rng.uniform(-4, 4, 5) + 1j * rng.uniform(0.2, 4, 5)
for zz in z:
    val = f1(zz) * g1(zz) + f2(zz) * g2(zz)
    print("  f1 g1 + f2 g2 at %5.2f%+5.2fi = %.12f%+.2ei"
          % (zz.real, zz.imag, val.real, val.imag))

# the independent certificate: rational u1, u2 with f1 u1 + f2 u2 = 1,
# no invertibility claimed for u1
u1, u2 = bezout_oracle(f1, f2)
print("oracle certified residual: %.2e" % u1.certified_residual)

# a sign-violating pair is rejected before any construction
bad1 = BlaschkeProduct.from_zeros([2j])
bad2 = BlaschkeProduct.from_zeros([1j, 4j])
rep2, _ = run_pipeline(bad1, bad2, 0.1, resolution=128)
print("violating pair ->", rep2.status,
      "witnesses:", rep2.diagnostics["violation_witnesses"])
