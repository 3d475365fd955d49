"""Backend selection for the heat-kernel series loops.

Prefers the compiled Cython extension and falls back to the NumPy
implementation when it is not built.  Set ``SE3DIFFUSE_FORCE_NUMPY=1`` to
force the fallback (used by the benchmark and the backend-agreement
tests).
"""

from __future__ import annotations

import os

from . import series_np

if os.environ.get("SE3DIFFUSE_FORCE_NUMPY"):
    _impl = series_np
    BACKEND = "numpy"
else:
    try:
        from . import _series_cy as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = series_np
        BACKEND = "numpy"

series_f = _impl.series_f
series_df = _impl.series_df
series_moment = _impl.series_moment

__all__ = ["BACKEND", "series_f", "series_df", "series_moment", "series_np"]
