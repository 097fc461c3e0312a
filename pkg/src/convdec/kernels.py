"""Backend selection for the arc kernels.

The compiled module is used when it was built; otherwise the pure-Python
mirror is loaded. Setting ``CONVDEC_PURE_PYTHON=1`` forces the fallback.
"""
import os

if os.environ.get("CONVDEC_PURE_PYTHON", "") not in ("", "0"):
    from . import _pykernels as backend
else:
    try:
        from . import _ckernels as backend
    except ImportError:  # extension not built
        from . import _pykernels as backend

BACKEND = backend.NAME
KIND_POLY = backend.KIND_POLY
KIND_CANTOR = backend.KIND_CANTOR
KIND_PL = backend.KIND_PL


def available_backends():
    """Return the importable kernel modules keyed by name."""
    from . import _pykernels
    found = {"python": _pykernels}
    try:
        from . import _ckernels
        found["cython"] = _ckernels
    except ImportError:
        pass
    return found
