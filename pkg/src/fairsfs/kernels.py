"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy versions
are used. Set ``FAIRSFS_PURE_PYTHON=1`` to force the fallback.
"""

import os

import numpy as np

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("FAIRSFS_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        _impl = _compiled


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def g2_from_codes(x, y, z, cx, cy, nz, backend=None):
    impl = _pick(backend)
    return impl.g2_from_codes(_i64(x), _i64(y), _i64(z), int(cx), int(cy), int(nz))


def knn_predict(train, labels, queries, k, backend=None):
    impl = _pick(backend)
    return impl.knn_predict(_i64(train), _i64(labels), _i64(queries), int(k))


g2_from_counts = _kernels_py.g2_from_counts


def _pick(backend):
    if backend is None:
        return _impl
    if backend == "python":
        return _kernels_py
    if backend == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown kernel backend {backend!r}")
