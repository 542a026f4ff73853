# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: cyclic Jacobi eigensolver and CSR breadth-first search.

The pure-Python equivalents live in ``_reference``; ``backend`` picks whichever
is importable.  Both implement the same algorithms so results agree to
rounding.
"""

from libc.math cimport fabs, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()

JACOBI_OFF_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


class JacobiConvergenceError(RuntimeError):
    """Off-diagonal mass failed to reach the threshold within the sweep cap."""


def jacobi_eigh(A):
    """Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.

    Sweeps Givens rotations over all (p, q) pivots until the off-diagonal
    Frobenius norm drops below 1e-12 relative to the input Frobenius norm
    (at most 100 sweeps).  Returns ``(w, V)`` with eigenvalues ascending and
    eigenvectors in the columns of ``V``, like ``numpy.linalg.eigh``.
    """
    a = np.array(A, dtype=np.float64, order="C", copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("jacobi_eigh expects a square matrix")
    cdef Py_ssize_t n = a.shape[0]
    if n == 0:
        return np.empty(0), np.empty((0, 0))
    if n == 1:
        return a[0].copy(), np.ones((1, 1))

    v = np.eye(n, dtype=np.float64)
    cdef double[:, ::1] am = a
    cdef double[:, ::1] vm = v

    cdef double fro = 0.0, off = 0.0
    cdef Py_ssize_t i, j, p, q, k, sweep
    for i in range(n):
        for j in range(n):
            fro += am[i, j] * am[i, j]
    fro = sqrt(fro)
    cdef double tol = JACOBI_OFF_TOL * (fro if fro > 1.0 else 1.0)

    cdef double apq, app, aqq, theta, t, c, s, aip, aiq
    cdef bint converged = False
    for sweep in range(JACOBI_MAX_SWEEPS):
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * am[i, j] * am[i, j]
        if sqrt(off) <= tol:
            converged = True
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = am[p, q]
                if apq == 0.0:
                    continue
                app = am[p, p]
                aqq = am[q, q]
                theta = (aqq - app) / (2.0 * apq)
                if theta >= 0.0:
                    t = 1.0 / (theta + sqrt(theta * theta + 1.0))
                else:
                    t = -1.0 / (-theta + sqrt(theta * theta + 1.0))
                c = 1.0 / sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    aip = am[k, p]
                    aiq = am[k, q]
                    am[k, p] = c * aip - s * aiq
                    am[k, q] = s * aip + c * aiq
                for k in range(n):
                    aip = am[p, k]
                    aiq = am[q, k]
                    am[p, k] = c * aip - s * aiq
                    am[q, k] = s * aip + c * aiq
                for k in range(n):
                    aip = vm[k, p]
                    aiq = vm[k, q]
                    vm[k, p] = c * aip - s * aiq
                    vm[k, q] = s * aip + c * aiq
    if not converged:
        off = 0.0
        for i in range(n):
            for j in range(i + 1, n):
                off += 2.0 * am[i, j] * am[i, j]
        if sqrt(off) > tol:
            raise JacobiConvergenceError(
                f"off-diagonal norm {sqrt(off):.3e} above {tol:.3e} "
                f"after {JACOBI_MAX_SWEEPS} sweeps"
            )

    w = np.diagonal(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def bfs_distances(indptr, indices, Py_ssize_t source):
    """Hop distances from ``source`` over a CSR adjacency; -1 marks unreachable."""
    cdef cnp.int64_t[::1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.int64_t[::1] idx = np.ascontiguousarray(indices, dtype=np.int64)
    cdef Py_ssize_t n = ip.shape[0] - 1
    if source < 0 or source >= n:
        raise IndexError(f"source {source} out of range for {n} vertices")
    dist_arr = np.full(n, -1, dtype=np.int64)
    queue_arr = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] dist = dist_arr
    cdef cnp.int64_t[::1] queue = queue_arr
    cdef Py_ssize_t head = 0, tail = 0, u, w
    cdef cnp.int64_t e
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
    return dist_arr
