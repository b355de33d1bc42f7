"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting ``NTNOPT_PURE_PYTHON=1``
forces the numpy fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
project_rows = _pykernels.project_rows
greedy_assign = _pykernels.greedy_assign

if os.environ.get("NTNOPT_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        project_rows = _kernels.project_rows
        greedy_assign = _kernels.greedy_assign
