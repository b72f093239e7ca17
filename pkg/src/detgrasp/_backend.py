"""Kernel backend selection.

The compiled core is used when it imports cleanly; set ``DETGRASP_PURE_PYTHON=1``
to force the fallback.
"""
import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if not os.environ.get("DETGRASP_PURE_PYTHON"):
    try:
        from . import _core as _impl  # noqa: F811

        BACKEND = "cython"
    except ImportError:
        _impl = _fallback

conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward
convex_intersection_area = _impl.convex_intersection_area
