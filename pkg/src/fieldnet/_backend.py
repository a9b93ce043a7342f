"""Pick the compiled kernels when available, else the NumPy fallback.

Set ``FIELDNET_BACKEND=python`` to force the fallback.
"""

import os

from . import _fallback

try:
    from . import _core as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and os.environ.get("FIELDNET_BACKEND", "").lower() != "python":
    _impl = _compiled
    BACKEND = "compiled"
else:
    _impl = _fallback
    BACKEND = "python"

gaussian_kernels = _impl.gaussian_kernels
estimator_tick = _impl.estimator_tick


def available_backends():
    """Mapping of backend name to module, for tests and benchmarks."""
    out = {"python": _fallback}
    if _compiled is not None:
        out["compiled"] = _compiled
    return out
