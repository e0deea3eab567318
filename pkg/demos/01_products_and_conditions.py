"""Blaschke products on the half-plane: evaluation, symmetry, and the
two conditions (corona and single-sign) that the pipeline screens.
"""

from stabilize import (
    BlaschkeProduct,
    axis_sign_condition,
    corona_delta_details,
    log_modulus_bounds,
)

# A real-symmetric product stores every off-axis zero with its mirror.
f1 = BlaschkeProduct.from_zeros([1j, 3j, 1 + 1j, -1 + 1j])
f2 = BlaschkeProduct.from_zeros([2.2j])
print("f1 zeros:", f1.zeros)
print("f1 is symmetric:", f1.is_symmetric())

# Values are real on the imaginary axis and unimodular on the real line.
print("f1(2i)       =", f1(2j))
print("|f1(5.0)|    =", abs(f1(5.0)))

# The corona quantity delta = inf |f1| + |f2|, measured by grid search
# with refinement plus an analytic outer enclosure.
details = corona_delta_details(f1, f2)
print("delta        = %.6f (attained near %s, enclosure radius %.1f)"
      % (details["delta"], details["argmin"], details["enclosure_radius"]))

# The single-sign condition: f1 keeps one sign on {y : |f2(iy)| < eps}.
res = axis_sign_condition(f1, f2, 0.1)
print("sign condition ok:", res.ok, " common sign:", res.sign)
print("sublevel intervals:", [tuple(round(v, 3) for v in t)
                              for t in res.intervals])

# A violating pair returns two witnesses of opposite sign instead.
g1 = BlaschkeProduct.from_zeros([2j])
g2 = BlaschkeProduct.from_zeros([1j, 4j])
bad = axis_sign_condition(g1, g2, 0.1)
print("violating pair ok:", bad.ok, " witnesses:", bad.witnesses)

# Two-sided bound for log(1/|B|) under the factor-modulus hypothesis.
lower, upper, actual = log_modulus_bounds(BlaschkeProduct.from_zeros([1j]),
                                          10j, 0.5)
print("log-modulus bounds: %.4f <= %.4f <= %.4f" % (lower, actual, upper))
