"""Backend selection for the hot loops.

The compiled extension is preferred; the pure-Python module is used when the
extension is missing or when the environment variable
``DIRAC_SOLITON_PURE_PYTHON`` is set to a non-empty value other than ``0``.
"""

import os

from . import _pykernels

_force_python = os.environ.get("DIRAC_SOLITON_PURE_PYTHON", "") not in ("", "0")

if _force_python:
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
        BACKEND = "python"

nls_trajectory = _impl.nls_trajectory
dirac_trajectory = _impl.dirac_trajectory
exp_sweeps = _impl.exp_sweeps

UNDECIDED = _pykernels.UNDECIDED
OVERSHOOT = _pykernels.OVERSHOOT
UNDERSHOOT = _pykernels.UNDERSHOOT


def backend_module(name):
    """Return the kernel module for ``name`` ('cython' or 'python')."""
    if name == "python":
        return _pykernels
    if name == "cython":
        from . import _ckernels
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")
