"""Backend selection: compiled ``_speedups`` when built, ``_reference`` otherwise.

``BACKEND`` names the active implementation ("compiled" / "python").  Set
``COARSECERT_PURE_PYTHON=1`` in the environment to force the fallback, e.g.
for benchmarking the two against each other.
"""

from __future__ import annotations

import os

from . import _reference

if os.environ.get("COARSECERT_PURE_PYTHON") == "1":
    _impl = _reference
    BACKEND = "python"
else:
    try:
        from . import _speedups as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = _reference
        BACKEND = "python"

jacobi_eigh = _impl.jacobi_eigh
bfs_distances = _impl.bfs_distances
JacobiConvergenceError = _impl.JacobiConvergenceError
JACOBI_OFF_TOL = _impl.JACOBI_OFF_TOL
JACOBI_MAX_SWEEPS = _impl.JACOBI_MAX_SWEEPS
