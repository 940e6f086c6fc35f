"""Kernel backend chosen at import: compiled ``_ckernels`` if available.

Set ``NBILLIARD_PURE=1`` to force the pure-Python fallback.
"""
import os

from . import _pykernels as pure

BACKEND = "python"
if os.environ.get("NBILLIARD_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = pure
else:
    _impl = pure

potential = _impl.potential
gradient = _impl.gradient
laplacian = _impl.laplacian
hessian = _impl.hessian
potential_many = _impl.potential_many
gradient_many = _impl.gradient_many
hessian_many = _impl.hessian_many
min_centre_distance = _impl.min_centre_distance
path_length = _impl.path_length
integrate = _impl.integrate

WALL, ESCAPED, COLLISION, STEP_LIMIT, NONFINITE, TIME_LIMIT = range(6)
