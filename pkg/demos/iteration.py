"""
Iterating one deformation
=========================

Applying the same phi k times is again a single deformation with some psi_k.
For Kropina, psi_k(s) = s^(1 - 2^(k+1)); for Randers, psi_k(s) = 1 + k s,
which stops being a norm once k |beta| > 1.
"""

import numpy as np

from minkdeform import deform
from minkdeform.norms import Euclidean
from minkdeform.phi import builtin

s = np.array([0.5, 2.0])
for k, psi in enumerate(deform.psi_sequence(builtin("kropina", [1]), 5, s), start=1):
    print(f"k={k}  exponent {np.log(psi[0]) / np.log(s[0]): .6f}  expected {1 - 2 ** (k + 1)}")

b = 0.3
it = deform.iterate(Euclidean.identity(2), [[b, 0]], builtin("randers"), 5, n_samples=512)
for k, rep in enumerate(it.reports, start=1):
    print(f"F_{k} = F + {k} beta: {'norm' if rep.passed else 'not a norm'}")
print("first invalid step:", it.first_invalid, " 1/|beta| =", round(1 / b, 3))

# composing by hand gives the same phi as two steps
two = deform.compose(builtin("randers"), builtin("randers"))
print("randers o randers =", two, "->", two(0.25))
