"""Select the compiled moment kernels when available, else the numpy fallback.

Set ``MFATTITUDE_PUREPY=1`` to force the fallback (used by the benchmark and
the backend cross-check tests).
"""
import os

from . import _kernels_py

if os.environ.get("MFATTITUDE_PUREPY"):
    kernels = _kernels_py
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        kernels = _kernels_py

BACKEND = "compiled" if kernels is not _kernels_py else "python"
