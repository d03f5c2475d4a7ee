"""Kernel selection: compiled extension when importable, NumPy otherwise.

Set ``MHD3S_KERNELS=python`` to force the NumPy fallback.
"""

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback
if os.environ.get("MHD3S_KERNELS", "").lower() != "python":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback

mode_propagate = _impl.mode_propagate
mhd_pointwise = _impl.mhd_pointwise

__all__ = ["BACKEND", "mode_propagate", "mhd_pointwise"]
