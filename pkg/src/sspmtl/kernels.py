"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the NumPy
fallback is imported. Set ``SSPMTL_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py as python_backend

compiled_backend = None
if os.environ.get("SSPMTL_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _kernels as compiled_backend
    except ImportError:
        compiled_backend = None

backend = compiled_backend if compiled_backend is not None else python_backend
BACKEND = backend.BACKEND

ray_sums = backend.ray_sums
solve_angle = backend.solve_angle
solve_many = backend.solve_many
jacobi_eigh = backend.jacobi_eigh

__all__ = [
    "BACKEND", "backend", "compiled_backend", "python_backend",
    "ray_sums", "solve_angle", "solve_many", "jacobi_eigh",
]
