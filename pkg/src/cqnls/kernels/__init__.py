"""Hot pointwise kernels with a numba backend and a pure-numpy fallback.

Backend selection, checked once at import:

  CQNLS_KERNELS=numba   force numba (ImportError if unavailable)
  CQNLS_KERNELS=numpy   force the pure-numpy path
  unset / auto          numba when importable, else numpy

``benchmarks/kernel_bench.py`` compares the two on production-sized grids.
FFTs are not selected here; they always go through scipy.fft.
"""

import os

_choice = os.environ.get("CQNLS_KERNELS", "auto").lower()

if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(f"CQNLS_KERNELS must be auto|numba|numpy, got {_choice!r}")

if _choice == "numpy":
    from . import _numpy as _impl
else:
    try:
        from . import _numba as _impl
    except ImportError:
        if _choice == "numba":
            raise
        from . import _numpy as _impl

BACKEND = _impl.BACKEND_NAME

abs2 = _impl.abs2
density_moments = _impl.density_moments
wdot = _impl.wdot
norm2sq = _impl.norm2sq
gradient_combine = _impl.gradient_combine
hessian_combine = _impl.hessian_combine
phase_apply = _impl.phase_apply
crc64 = _impl.crc64

__all__ = [
    "BACKEND",
    "abs2",
    "density_moments",
    "wdot",
    "norm2sq",
    "gradient_combine",
    "hessian_combine",
    "phase_apply",
    "crc64",
]
