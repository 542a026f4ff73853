"""Pure-Python fallback for the compiled kernels in ``_speedups``.

Same algorithms, NumPy-assisted: a cyclic Jacobi eigensolver and a CSR
breadth-first search.  Used when the extension is not built; also the
cross-check partner for the backend agreement tests.
"""

from __future__ import annotations

import math

import numpy as np

JACOBI_OFF_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class JacobiConvergenceError(RuntimeError):
    """Off-diagonal mass failed to reach the threshold within the sweep cap."""


def _off_norm(a: np.ndarray) -> float:
    off = a - np.diag(np.diagonal(a))
    return float(np.sqrt(np.sum(off * off)))


def jacobi_eigh(A) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition; see ``_speedups.jacobi_eigh``."""
    a = np.array(A, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("jacobi_eigh expects a square matrix")
    n = a.shape[0]
    if n == 0:
        return np.empty(0), np.empty((0, 0))
    if n == 1:
        return a[0].copy(), np.ones((1, 1))

    v = np.eye(n)
    fro = float(np.sqrt(np.sum(a * a)))
    tol = JACOBI_OFF_TOL * max(fro, 1.0)

    converged = False
    for _ in range(JACOBI_MAX_SWEEPS):
        if _off_norm(a) <= tol:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.sqrt(theta * theta + 1.0)
                )
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q
    if not converged and _off_norm(a) > tol:
        raise JacobiConvergenceError(
            f"off-diagonal norm {_off_norm(a):.3e} above {tol:.3e} "
            f"after {JACOBI_MAX_SWEEPS} sweeps"
        )

    w = np.diagonal(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def bfs_distances(indptr, indices, source: int) -> np.ndarray:
    """Hop distances from ``source`` over a CSR adjacency; -1 marks unreachable."""
    ip = np.asarray(indptr, dtype=np.int64)
    idx = np.asarray(indices, dtype=np.int64)
    n = ip.shape[0] - 1
    if source < 0 or source >= n:
        raise IndexError(f"source {source} out of range for {n} vertices")
    dist = np.full(n, -1, dtype=np.int64)
    queue = np.empty(n, dtype=np.int64)
    head = tail = 0
    dist[source] = 0
    queue[tail] = source
    tail += 1
    while head < tail:
        u = queue[head]
        head += 1
        for e in range(ip[u], ip[u + 1]):
            w = idx[e]
            if dist[w] < 0:
                dist[w] = dist[u] + 1
                queue[tail] = w
                tail += 1
    return dist
