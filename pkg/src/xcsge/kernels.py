"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
numpy fallback. Setting ``XCSGE_BACKEND=python`` forces the fallback.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

if _ckernels is not None and os.environ.get("XCSGE_BACKEND", "").lower() != "python":
    BACKEND = "cython"
    _impl = _ckernels
else:
    BACKEND = "python"
    _impl = _pykernels

knn_mean = _impl.knn_mean
fuse = _impl.fuse


def available_backends():
    """Names of the importable kernel backends."""
    return ["python"] + (["cython"] if _ckernels is not None else [])


def get_backend(name):
    if name == "python":
        return _pykernels
    if name == "cython" and _ckernels is not None:
        return _ckernels
    raise ValueError(f"kernel backend {name!r} is not available")
