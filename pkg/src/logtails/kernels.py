"""Select the compiled kernel, or the numpy fallback when it is unavailable.

Set ``LOGTAILS_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

if os.environ.get("LOGTAILS_PURE_PYTHON", "") not in ("", "0"):
    accumulate_chunk = _kernels_py.accumulate_chunk
    BACKEND = "python"
else:
    try:
        from ._kernels import accumulate_chunk
    except ImportError:
        accumulate_chunk = _kernels_py.accumulate_chunk
        BACKEND = "python"
    else:
        BACKEND = "cython"

__all__ = ["accumulate_chunk", "BACKEND"]
