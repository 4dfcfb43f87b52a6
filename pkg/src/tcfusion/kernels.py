"""Kernel backend selection.

The compiled extension is preferred when available; the numpy fallback is
interchangeable. Set TCFUSION_PURE_PYTHON=1 to force the fallback (used by
the benchmark and by tests that exercise both backends).
"""

from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("TCFUSION_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

solve_lap = _impl.solve_lap
pairwise_track_cost = _impl.pairwise_track_cost


def available_backends() -> dict[str, object]:
    """Importable kernel modules by name (for benchmarks and cross-checks)."""
    backends: dict[str, object] = {"python": _kernels_py}
    try:
        from . import _kernels  # type: ignore[attr-defined]

        backends["cython"] = _kernels
    except ImportError:
        pass
    return backends
