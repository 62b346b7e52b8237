"""Backend selection for the kinematic sweep.

The compiled extension is used when it imports; set ``PLSROD_BACKEND=python``
to force the numpy fallback or ``PLSROD_BACKEND=compiled`` to make a missing
extension an import error.
"""

from __future__ import annotations

import os

from . import _sweep_py

_choice = os.environ.get("PLSROD_BACKEND", "auto").lower()

_compiled = None
if _choice != "python":
    try:
        from . import _sweep as _compiled  # type: ignore[attr-defined]
    except ImportError:
        if _choice == "compiled":
            raise
        _compiled = None

BACKENDS = {"python": _sweep_py.sweep}
if _compiled is not None:
    BACKENDS["compiled"] = _compiled.sweep

BACKEND = "compiled" if _compiled is not None else "python"
sweep = BACKENDS[BACKEND]


def use_backend(name):
    """Switch the active backend at runtime (tests and benchmarks)."""
    global sweep, BACKEND
    if name not in BACKENDS:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}")
    BACKEND = name
    sweep = BACKENDS[name]
