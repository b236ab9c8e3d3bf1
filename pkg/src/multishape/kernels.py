"""Backend selection for the alignment kernels.

The compiled Cython module is preferred; the pure-numpy module is used when
the extension was not built or when ``MULTISHAPE_PURE_PYTHON`` is set to a
non-empty value other than ``0``.
"""
import os

from . import _pykernels

_force_pure = os.environ.get("MULTISHAPE_PURE_PYTHON", "") not in ("", "0")

try:
    if _force_pure:
        raise ImportError("pure-Python kernels requested")
    from . import _ckernels as _impl

    BACKEND = "cython"
except ImportError:
    _impl = _pykernels
    BACKEND = "python"

best_shift = _impl.best_shift
best_rotation = _impl.best_rotation
shift_stats = _impl.shift_stats
shift_template = _impl.shift_template
icf_run = _impl.icf_run


def available_backends() -> dict:
    """Map backend name to kernel module for every backend importable here."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
