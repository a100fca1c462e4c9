"""Kernel backend selection.

Imports the compiled extension when present, otherwise falls back to the
numpy implementation. ``XAIBENCH_PURE=1`` forces the fallback (used by
the parity tests and the kernel benchmark).
"""

import os

if os.environ.get("XAIBENCH_PURE") == "1":
    from xaibench import _kernels_np as _impl
else:
    try:
        from xaibench import _kernels_c as _impl  # type: ignore[attr-defined]
    except ImportError:
        from xaibench import _kernels_np as _impl

BACKEND = _impl.BACKEND
conv2d_forward = _impl.conv2d_forward
conv2d_backward_input = _impl.conv2d_backward_input
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward
