"""Backend selection for the array kernels.

The compiled extension is used when it was built; otherwise the numpy
fallback is used. Setting ``BOXSEG_PURE_PYTHON=1`` forces the fallback.
"""
import os

from . import _fallback

compiled = None
if os.environ.get("BOXSEG_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _kernels as compiled
    except ImportError:
        compiled = None

BACKEND = "cython" if compiled is not None else "python"
_impl = compiled if compiled is not None else _fallback

project = _impl.project
back_project = _impl.back_project
m2b = _impl.m2b
m2b_backward = _impl.m2b_backward
component_boxes = _impl.component_boxes
overlap_counts = _impl.overlap_counts


def backends():
    """Every importable backend by name, regardless of which one is active."""
    out = {"python": _fallback}
    try:
        from . import _kernels
    except ImportError:
        return out
    out["cython"] = _kernels
    return out
