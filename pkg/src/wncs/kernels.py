"""Backend selection for the hot loops.

The compiled extension is used when it imports; setting ``WNCS_PURE_PYTHON=1``
forces the pure-Python twins.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

if _ckernels is not None and not os.environ.get("WNCS_PURE_PYTHON"):
    _impl = _ckernels
    BACKEND = "compiled"
else:
    _impl = _pykernels
    BACKEND = "python"

QUAD_DIGITS = _impl.QUAD_DIGITS


def get(name=None):
    """Return a kernel module by name ("compiled" / "python") or the active one."""
    if name is None:
        return _impl
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built")
        return _ckernels
    raise ValueError(f"unknown backend {name!r}")


def rvi(*args, backend=None):
    return get(backend).rvi(*args)


def episode(*args, backend=None):
    return get(backend).episode(*args)
