"""Deformations of Minkowski norms by 1-forms, with exact third-order tensors."""

import os as _os

# MINKDEFORM_THREADS caps the BLAS pools; it only takes effect when set
# before numpy is first imported.
if "MINKDEFORM_THREADS" in _os.environ:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _os.environ["MINKDEFORM_THREADS"])

from .errors import *  # noqa: E402,F401,F403
from .jets import Jet  # noqa: E402
from .phi import PhiExpr, builtin, parse, from_text  # noqa: E402
from .norms import (Euclidean, MRoot, Deformed, DeformationSpec, value,  # noqa: E402
                    tensors, fundamental_tensor, cartan_torsion, mean_cartan,
                    angular_metric)
from .deform import (apply, rho_functions, validity_check, compose,  # noqa: E402
                     invert, invert_spec, iterate, psi_sequence, difference_norm)

__all__ = [
    "Jet", "PhiExpr", "builtin", "parse", "from_text", "Euclidean", "MRoot",
    "Deformed", "DeformationSpec", "value", "tensors", "fundamental_tensor",
    "cartan_torsion", "mean_cartan", "angular_metric", "apply", "rho_functions",
    "validity_check", "compose", "invert", "invert_spec", "iterate",
    "psi_sequence", "difference_norm",
]
