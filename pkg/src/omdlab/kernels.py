"""Kernel dispatch: compiled Cython kernels when built, NumPy fallback otherwise.

Set ``OMD_LAB_PURE_PYTHON=1`` before import to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("OMD_LAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

project_capped_simplex = _impl.project_capped_simplex
entropy_simplex_step = _impl.entropy_simplex_step
burg_simplex_step = _impl.burg_simplex_step
l1sq_box_step = _impl.l1sq_box_step

__all__ = [
    "BACKEND",
    "project_capped_simplex",
    "entropy_simplex_step",
    "burg_simplex_step",
    "l1sq_box_step",
]
