"""Hot-path kernel selection.

The compiled Cython kernel is used when it imported cleanly; otherwise the
NumPy reference implementation takes over.  Set GGSSM_PURE_PYTHON=1 to force
the fallback (the benchmark uses this to compare both).
"""

from __future__ import annotations

import os

from . import _ref

if os.environ.get("GGSSM_PURE_PYTHON"):
    _impl = _ref
else:
    try:
        from . import _filtkern as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _ref

batch_filter_loglik = _impl.batch_filter_loglik
BACKEND = _impl.BACKEND_NAME

__all__ = ["batch_filter_loglik", "BACKEND"]
