"""Distance kernels with a compiled core and a pure-numpy fallback.

The backend is chosen once at import time.  Set ROMC_KERNELS=native or
ROMC_KERNELS=numpy to force a backend; the default (auto) prefers the
compiled extension and silently falls back to numpy when it is missing.
The selected backend is exposed as romc.kernels.BACKEND.
"""

import os

from . import _numpy

_choice = os.environ.get("ROMC_KERNELS", "auto").lower()
if _choice not in ("auto", "native", "numpy"):
    raise ValueError(f"ROMC_KERNELS must be auto, native or numpy, got {_choice!r}")

if _choice == "numpy":
    _impl = _numpy
else:
    try:
        from . import _native as _impl
    except ImportError:
        if _choice == "native":
            raise ImportError(
                "ROMC_KERNELS=native but the compiled extension is not available"
            )
        _impl = _numpy

BACKEND = _impl.BACKEND

ma2_series = _impl.ma2_series
autocov_summaries = _impl.autocov_summaries
ma2_distance_batch = _impl.ma2_distance_batch
toy_location = _impl.toy_location
toy_distance_batch = _impl.toy_distance_batch

# Reference implementations, always available for cross-checking.
numpy_backend = _numpy

__all__ = [
    "BACKEND",
    "ma2_series",
    "autocov_summaries",
    "ma2_distance_batch",
    "toy_location",
    "toy_distance_batch",
    "numpy_backend",
]
