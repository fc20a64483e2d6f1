"""Backend selection for the transfer kernel.

The compiled extension is used when it imports; otherwise (or when the
environment variable ``QUENCHWALL_PURE_PYTHON`` is set to a non-empty
value) the numpy fallback is used.  Both expose ``gauss_step``.
"""
from __future__ import annotations

import os

from . import _kernels_py
from ._kernels_py import MODE_BRIDGE, MODE_CELL, MODE_FREE, lattice_step

BACKEND = "python"
gauss_step = _kernels_py.gauss_step

if not os.environ.get("QUENCHWALL_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    if _compiled is not None:
        BACKEND = "compiled"
        gauss_step = _compiled.gauss_step


def backends() -> dict:
    """All importable implementations of ``gauss_step`` keyed by name."""
    out = {"python": _kernels_py.gauss_step}
    try:
        from . import _kernels as _compiled
        out["compiled"] = _compiled.gauss_step
    except ImportError:
        pass
    return out


__all__ = ["BACKEND", "gauss_step", "lattice_step", "backends", "MODE_FREE", "MODE_BRIDGE", "MODE_CELL"]
