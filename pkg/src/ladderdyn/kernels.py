"""Backend selection for the hot kernels.

The compiled extension is used when importable. Setting
``LADDERDYN_BACKEND=python`` forces the numpy fallback.
"""
import os

from . import _fallback

BACKEND = "python"
h_step = _fallback.h_step

if os.environ.get("LADDERDYN_BACKEND", "").lower() != "python":
    try:
        from ._ext import kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        BACKEND = "cython"
        h_step = _compiled.h_step

__all__ = ["BACKEND", "h_step"]
