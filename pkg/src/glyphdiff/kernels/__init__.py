"""Hot convolution kernels with selectable backends.

Two interchangeable implementations of the 3x3 convolution (forward,
input-gradient, weight-gradient) are provided:

* ``numba`` -- parallel JIT kernels (default when numba is importable)
* ``numpy`` -- pure-numpy fallback built on sliding windows + BLAS

The active backend is chosen once at import time from the
``GLYPHDIFF_KERNELS`` environment variable ("numba" or "numpy") and can
be switched programmatically with :func:`set_backend` (used by tests and
the benchmark script).  Both backends produce results that agree to
float rounding; within one backend results are bit-deterministic because
no kernel accumulates across threads.
"""

import os

from . import numpy_ops

try:
    from . import numba_ops

    _HAVE_NUMBA = True
except ImportError:
    numba_ops = None
    _HAVE_NUMBA = False

_BACKENDS = {"numpy": numpy_ops}
if _HAVE_NUMBA:
    _BACKENDS["numba"] = numba_ops


def _initial_backend():
    name = os.environ.get("GLYPHDIFF_KERNELS", "").strip().lower()
    if name:
        if name not in ("numpy", "numba"):
            raise RuntimeError(
                f"GLYPHDIFF_KERNELS must be 'numpy' or 'numba', got {name!r}"
            )
        if name == "numba" and not _HAVE_NUMBA:
            raise RuntimeError("GLYPHDIFF_KERNELS=numba but numba is not importable")
        return name
    return "numba" if _HAVE_NUMBA else "numpy"


_active = _initial_backend()


def active_backend():
    """Name of the backend currently serving the conv kernels."""
    return _active


def available_backends():
    return sorted(_BACKENDS)


def set_backend(name):
    """Switch conv kernels to ``name`` ("numpy" or "numba"). Returns the old name."""
    global _active
    if name not in _BACKENDS:
        raise RuntimeError(f"backend {name!r} not available (have {available_backends()})")
    old, _active = _active, name
    return old


def conv2d_forward(x, w, stride):
    """3x3 convolution, zero padding 1, stride 1 or 2.

    x: (B, C, H, W), w: (O, C, 3, 3) -> (B, O, Ho, Wo) with
    Ho = floor((H - 1) / stride) + 1 and likewise for Wo.
    """
    return _BACKENDS[_active].conv2d_forward(x, w, stride)


def conv2d_backward_input(dy, w, stride, in_hw):
    """Gradient of conv2d_forward w.r.t. its input. in_hw = (H, W) of x."""
    return _BACKENDS[_active].conv2d_backward_input(dy, w, stride, in_hw)


def conv2d_backward_weight(dy, x, stride):
    """Gradient of conv2d_forward w.r.t. the kernel weights."""
    return _BACKENDS[_active].conv2d_backward_weight(dy, x, stride)
