"""Solver backend selection.

The compiled extension is preferred when importable; the numpy fallback is
behaviorally identical. Set SCCANET_FORCE_PYTHON=1 to skip the extension
(useful for debugging and benchmarking).
"""

from __future__ import annotations

import os

from . import _core_py

_force_python = os.environ.get("SCCANET_FORCE_PYTHON", "").strip() not in ("", "0")

if _force_python:
    kernels = _core_py
else:
    try:
        from . import _core as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _core_py


def backend_name() -> str:
    """Either 'compiled' or 'python'."""
    return kernels.BACKEND_NAME
