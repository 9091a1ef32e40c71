"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The backend is chosen once at import time from the ``CLASLAB_BACKEND``
environment variable (``numba`` or ``numpy``). Without the variable numba is
used when it imports cleanly.

Both backends accumulate in the same fixed index order, so they return
bit-identical results; the numpy versions vectorise over the independent
axes and loop over the reduction axis.
"""

from __future__ import annotations

import logging
import os

from . import _numpy

log = logging.getLogger(__name__)

_requested = os.environ.get("CLASLAB_BACKEND", "").strip().lower()
if _requested not in ("", "numba", "numpy"):
    raise ImportError(f"CLASLAB_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

_impl = _numpy
BACKEND = "numpy"
if _requested != "numpy":
    try:
        from . import _numba

        _impl = _numba
        BACKEND = "numba"
    except ImportError:  # pragma: no cover - depends on environment
        if _requested == "numba":
            raise
        log.warning("numba unavailable, using numpy kernels")

linear = _impl.linear
row_sum = _impl.row_sum
tsne_grad = _impl.tsne_grad

__all__ = ["BACKEND", "linear", "row_sum", "tsne_grad"]
