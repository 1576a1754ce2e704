"""Kernel dispatch: the compiled extension when available, numpy otherwise.

Set ``DISTLAB_PURE_PYTHON=1`` to force the numpy implementations.
"""

import os

from . import _fallback

HAVE_COMPILED = False
if os.environ.get("DISTLAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl

        HAVE_COMPILED = True
    except ImportError:  # extension not built
        _impl = _fallback
else:
    _impl = _fallback

march_squares = _impl.march_squares
directional_scan = _impl.directional_scan
probe_min_norm_gradients = _impl.probe_min_norm_gradients
hull_margin_2d = _impl.hull_margin_2d
