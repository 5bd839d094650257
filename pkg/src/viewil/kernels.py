"""Backend selection for the hot kernels.

The compiled ``_ckernels`` extension is used when it was built; otherwise the
numpy reference in ``_pykernels`` is used. Set ``VIEWIL_PURE_PYTHON=1`` to
force the fallback (the benchmark and the equivalence tests do this
per-call by importing both modules directly).
"""
import os

from . import _pykernels

if os.environ.get("VIEWIL_PURE_PYTHON"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = _impl.BACKEND

sed = _impl.sed
squishe_select = _impl.squishe_select
lloyd = _impl.lloyd
se_cross = _impl.se_cross
expected_improvement = _impl.expected_improvement
rollout_core = _impl.rollout_core


def available_backends():
    """Map backend name -> kernel module for every importable backend."""
    out = {"python": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        return out
    out["cython"] = _ckernels
    return out
