"""Backend selection for the trajectory kernels.

The compiled extension is used when importable; setting ``SEQMAG_PURE_PYTHON``
(to anything but ``0``/empty) forces the numpy fallback.
"""

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None


def available_backends():
    return ["cython", "python"] if _compiled is not None else ["python"]


def get_backend(name=None):
    """Return the kernel module for ``name`` (``"cython"``/``"python"``/None=auto)."""
    if name is None:
        forced = os.environ.get("SEQMAG_PURE_PYTHON", "")
        name = "python" if forced not in ("", "0") or _compiled is None else "cython"
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled seqmag._kernels extension is not built")
        return _compiled
    raise ValueError(f"unknown kernel backend {name!r}")


BACKEND = "cython" if get_backend() is not _kernels_py else "python"
