"""Backend selection for the dense decoders.

The compiled extension is used when it was built; otherwise, or when
``BIASCAL_PURE_PYTHON=1`` is set, the numpy fallback is used.
"""
import os

from . import _kernels_py

if os.environ.get("BIASCAL_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "python" if _impl is _kernels_py else "cython"
vsrl_decode = _impl.vsrl_decode
mlc_decode = _impl.mlc_decode


def available_backends():
    """Map of backend name to kernel module, for tests and benchmarks."""
    backends = {"python": _kernels_py}
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        backends["cython"] = _kernels
    return backends
