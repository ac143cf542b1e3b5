# # Virtual expansion of a torus skew product
#
# T(x, y) = (m x, y + m cos 2 pi x) expands in x but is neutral in y. The
# criterion sums, over the branches of T^n above a point, the Jacobian
# weight times a cotangent weight, and takes the sup over points and unit
# covectors. A value below 1 certifies expansion in the averaged sense.

import numpy as np

from livsic import AnalyticCircleMap, TsujiiSkewProduct, certify, min_expanding_m
from livsic.vexp import CriterionQuery, criterion_value

# ## Conformal sanity check
#
# For x -> k x every branch has derivative k, so the value is k^{-n s}.

for k, n, s in ((2, 1, 2.0), (3, 2, 1.0)):
    value, _ = criterion_value(CriterionQuery(AnalyticCircleMap(k, 0.0), s, n))
    print(f"k={k} n={n} s={s}: value {value:.6g}, closed form {k ** (-n * s):.6g}")

# ## Smallest certified m at s = 2
#
# Word length 2 lets the shears of different branches cancel each other's
# worst covectors.

m, cert = min_expanding_m(2.0, 2, range(2, 65))
print(f"m* = {m}: value {cert.value:.4f}, margin {cert.margin:.4f}, "
      f"worst point x = {cert.x_star:.4f}, angle = {cert.angle_star:.4f}")

# ## The other weighting
#
# Weighting by |(A^T)^{-1} v|^s instead of |A^T v|^{-s} keeps the vertical
# covector (0, 1) at norm at least 1 for every branch, so the sum never
# drops below 1 there.

bad = certify(TsujiiSkewProduct(m), 2.0, 2, variant="printed")
print(f"printed weighting at m={m}: value {bad.value:.3f} (angle {bad.angle_star:.4f})")
print("vertical angle is", f"{np.pi / 2:.4f}")
