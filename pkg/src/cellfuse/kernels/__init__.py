"""Dispatch layer exposing the active kernel backend.

Import-time binding: ``cellfuse.backend`` decides (via ``CELLFUSE_NUMBA``)
whether the numba or the pure-numpy implementations back the public names.
``get_impl`` returns a specific backend module regardless of the active one,
which is what the benchmark uses to compare both sides in one process.
"""

from __future__ import annotations

import numpy as np

from cellfuse import backend
from cellfuse.kernels import numpy_impl

if backend.USE_NUMBA:
    from cellfuse.kernels import numba_impl as _impl
else:
    _impl = numpy_impl

KERNEL_NAMES = (
    "glcm_counts",
    "gldm_counts",
    "glrlm_counts",
    "glszm_counts",
    "ngtdm_stats",
    "edge_list",
    "conv2d_fwd",
    "conv2d_gx",
    "conv2d_gw",
)

glcm_counts = _impl.glcm_counts
gldm_counts = _impl.gldm_counts
glrlm_counts = _impl.glrlm_counts
glszm_counts = _impl.glszm_counts
ngtdm_stats = _impl.ngtdm_stats
edge_list = _impl.edge_list
conv2d_fwd = _impl.conv2d_fwd
conv2d_gx = _impl.conv2d_gx
conv2d_gw = _impl.conv2d_gw


def get_impl(name: str):
    """Return a backend module by name ('numpy' or 'numba')."""
    if name == "numpy":
        return numpy_impl
    if name == "numba":
        from cellfuse.kernels import numba_impl

        return numba_impl
    raise ValueError(f"unknown kernel backend {name!r}")


def warmup() -> None:
    """Run every kernel once on tiny inputs to absorb one-time compile cost."""
    levels = np.array([[1, 2], [2, 1]], dtype=np.int64)
    glcm_counts(levels, 2)
    gldm_counts(levels, 2)
    glrlm_counts(levels, 2)
    glszm_counts(levels, 2)
    ngtdm_stats(levels, 2)
    edge_list(np.array([[0.0, 0.0], [1.0, 0.0]]), 1.5)
    x = np.zeros((1, 1, 4, 4))
    w = np.zeros((1, 1, 3, 3))
    y = conv2d_fwd(x, w, 1)
    conv2d_gx(y, w, 1, 4, 4)
    conv2d_gw(x, y, 1, 3, 3)
