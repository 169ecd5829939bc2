"""Select the kernel implementation at import time.

The compiled module is used when it imports cleanly, unless the
environment variable ``SPHYBRID_PURE_PYTHON`` is set to a non-empty value.
"""

import os

from . import _pykernels

try:
    if os.environ.get("SPHYBRID_PURE_PYTHON"):
        raise ImportError("pure-Python kernels requested")
    from . import _kernels as _active
    BACKEND = "cython"
except ImportError:
    _active = _pykernels
    BACKEND = "python"

expm = _active.expm
propagate = _active.propagate


def kernels(name=None):
    """Return the kernel module called ``name`` ("cython" or "python"), or the active one."""
    if name is None:
        return _active
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
