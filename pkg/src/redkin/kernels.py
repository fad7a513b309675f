"""Kernel dispatch: compiled extension when available, numpy fallback otherwise.

Set the environment variable ``REDKIN_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"

if os.environ.get("REDKIN_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    else:
        BACKEND = "compiled"
else:
    _compiled = None

if _compiled is not None:
    import numpy as _np

    def orthant_laurent(coeffs, exponents, powers, zero_tol):
        coeffs = _np.ascontiguousarray(coeffs, dtype=complex)
        exponents = _np.ascontiguousarray(exponents, dtype=complex)
        if exponents.ndim == 1:
            exponents = exponents.reshape(len(coeffs), -1)
        if powers is None:
            powers = _np.zeros(exponents.shape, dtype=_np.int64)
        powers = _np.ascontiguousarray(powers, dtype=_np.int64)
        return _compiled.orthant_laurent(coeffs, exponents, powers, float(zero_tol))

    def ordered_pair_sum(P):
        return _compiled.ordered_pair_sum(_np.ascontiguousarray(P, dtype=complex))

else:
    orthant_laurent = _kernels_py.orthant_laurent
    ordered_pair_sum = _kernels_py.ordered_pair_sum

__all__ = ["BACKEND", "orthant_laurent", "ordered_pair_sum"]
