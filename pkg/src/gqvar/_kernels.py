"""Backend selection for the hot kernels.

The compiled extension is used when it imports; otherwise the numpy
fallback is loaded. Setting ``GQVAR_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _pycore

if os.environ.get("GQVAR_PURE_PYTHON", "").strip() not in ("", "0"):
    _impl = _pycore
    BACKEND = "python"
else:
    try:
        from . import _core as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pycore
        BACKEND = "python"

lag_triple_sum = _impl.lag_triple_sum
toeplitz_square_sums = _impl.toeplitz_square_sums
brute_triple_sum = _impl.brute_triple_sum
brute_cyclic_quad_sum = _impl.brute_cyclic_quad_sum
hadamard_sum = _impl.hadamard_sum
nested_sigma_sq = _impl.nested_sigma_sq
simplex_sum = _impl.simplex_sum

__all__ = [
    "BACKEND",
    "lag_triple_sum",
    "toeplitz_square_sums",
    "brute_triple_sum",
    "brute_cyclic_quad_sum",
    "hadamard_sum",
    "nested_sigma_sq",
    "simplex_sum",
]
