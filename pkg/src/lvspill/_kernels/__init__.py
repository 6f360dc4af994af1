"""Hot numerical kernels with a compiled core and a pure-Python fallback.

The compiled extension ``_ckernels`` is used when it was built at install
time. Set ``LVSPILL_PURE_PYTHON=1`` to force the fallback, which is also
selected automatically when the extension cannot be imported.
"""

import os

from . import _fallback

BACKENDS = {"python": _fallback}

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
else:
    BACKENDS["compiled"] = _ckernels

if _ckernels is not None and os.environ.get("LVSPILL_PURE_PYTHON", "") in ("", "0"):
    BACKEND = "compiled"
    _impl = _ckernels
else:
    BACKEND = "python"
    _impl = _fallback

garch11_filter = _impl.garch11_filter
garch11_nll = _impl.garch11_nll
best_split = _impl.best_split
tree_shap = _impl.tree_shap
shap_buffer_size = _impl.shap_buffer_size


def get_backend(name=None):
    """Return the kernel module named ``name`` (default: the active one)."""
    if name is None:
        return _impl
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"kernel backend {name!r} is not available") from None
