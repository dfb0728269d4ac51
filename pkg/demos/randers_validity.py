"""
When is a Randers deformation still a norm?
============================================

F + beta stays a Minkowski norm while the 1-form is short, |beta| < 1.
Below we sweep |beta| and watch the sampled checks flip.
"""

import numpy as np

from minkdeform import deform
from minkdeform.norms import DeformationSpec, Euclidean
from minkdeform.phi import builtin

E = Euclidean.identity(2)
randers = builtin("randers")

for b in (0.2, 0.5, 0.9, 0.99, 1.2):
    rep = deform.validity_check(E, DeformationSpec([[b, 0.0]], randers), n_samples=1024)
    print(f"|beta| = {b:<5} passed={rep.passed!s:<5} min eigenvalue of gbar = {rep.min_eigen: .4f}"
          f"  domain failures = {rep.domain_failures}")

# the eigenvalue bottoms out opposite to beta, at y = -e1
rep = deform.validity_check(E, DeformationSpec([[0.9, 0.0]], randers), n_samples=1024)
print("worst direction for |beta| = 0.9:", np.round(rep.worst_sample, 6))

# Kropina is only defined on the half plane beta > 0
krop = deform.validity_check(E, DeformationSpec([[1.0, 0.0]], builtin("kropina", [1])), 1024)
print(f"Kropina: {krop.domain_failures} of 1024 directions fall outside the cone")
