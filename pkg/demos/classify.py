"""
Which norms are C-reducible?
============================

Randers and Kropina norms have Cartan torsion built from the angular metric
and the mean torsion alone.  Slope norms only manage the weaker semi form.
"""

from minkdeform import analysis
from minkdeform.deform import apply
from minkdeform.norms import Euclidean, MRoot
from minkdeform.phi import builtin

E = Euclidean.identity(3)
cases = {
    "euclidean": E,
    "randers": apply(E, [[0.3, 0.1, 0]], builtin("randers")),
    "kropina": apply(E, [[1, 0, 0]], builtin("kropina", [1])),
    "slope": apply(E, [[0.3, 0.1, 0]], builtin("slope")),
    "quartic": MRoot(4, 3),
}
for name, F in cases.items():
    r = analysis.classify_norm(F, samples=256)
    print(f"{name:10s} -> {r.kind:17s} metric type {r.metric_type or '-':8s} residual {r.residual_rel:.1e}")
