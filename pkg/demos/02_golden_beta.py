# # Golden-mean beta transformation with Ulam cells
#
# x -> beta x mod 1 with beta the golden mean has an explicit invariant
# density (Parry): two constant levels split at 1/beta. Ulam's method
# discretizes the transfer operator on N cells and recovers it.

import math

import numpy as np

from livsic import BetaTransformation, TwistedFamily, UlamBasis, project, recover
from livsic.selftest import parry_density

beta = (1 + math.sqrt(5)) / 2
T = BetaTransformation(beta)
B = UlamBasis(8192)

# ## Invariant density

fam = TwistedFamily(T, B, B.zeros())
chi = fam.chi
x = B.midpoints
parry = parry_density(beta, x)
print(f"eigenvalue        {fam.eig.eigenvalue.real:.12f}")
print(f"L1 to Parry       {np.mean(np.abs(chi.vector.real - parry)):.2e}")
left = x < 1 / beta
print(f"median levels     {np.median(chi.vector.real[left]):.6f} / {np.median(chi.vector.real[~left]):.6f}")

# The cells next to 0, 1/beta and 1 (the orbit of 1) carry a boundary layer
# of a few percent that decays geometrically into the interior.

print(f"worst cell error  {np.abs(chi.vector.real - parry).max():.3f}")
print(f"ess inf floor     {1 - 1 / beta:.6f}")

# ## Recovering a discontinuous transfer function
#
# h is the indicator of [0, 1/beta). f = h o T - h is a bounded-variation
# coboundary; the resolvent method solves the derivative equation on the
# complement of the density and divides by chi.

h = lambda y: (np.asarray(y) < 1 / beta).astype(float)
f = project(lambda y: h(T(y)) - h(y), B)
fam = TwistedFamily(T, B, f)
rec = recover(T, f, method="resolvent", family=fam)

# Transfer functions are unique up to constants; recover() fixes the one
# with zero mean against chi.

target = h(x) - np.mean(h(x) * fam.chi.vector.real)
print(f"L1 recovery error {np.mean(np.abs(rec.h.vector.real - target)):.2e}")
print(f"mean residual     {rec.mean_residual:.2e}")
