"""Compiled extension and pure-Python fallback agree and are both correct."""

import numpy as np
import pytest

from coarsecert import _reference
from coarsecert.backend import BACKEND, bfs_distances, jacobi_eigh

_speedups = pytest.importorskip("coarsecert._speedups")


def _random_symmetric(rng, m):
    a = rng.standard_normal((m, m))
    return a + a.T


@pytest.mark.parametrize("m", [1, 2, 3, 8, 17, 30])
def test_jacobi_matches_lapack(m, rng):
    a = _random_symmetric(rng, m)
    w, v = jacobi_eigh(a)
    assert np.allclose(w, np.linalg.eigvalsh(a), atol=1e-10)
    assert np.allclose(v @ np.diag(w) @ v.T, a, atol=1e-10)
    assert np.allclose(v.T @ v, np.eye(m), atol=1e-12)


@pytest.mark.parametrize("m", [2, 5, 13, 24])
def test_backends_agree(m, rng):
    a = _random_symmetric(rng, m)
    wc, _ = _speedups.jacobi_eigh(a)
    wp, _ = _reference.jacobi_eigh(a)
    assert np.allclose(wc, wp, atol=1e-12)


def test_jacobi_eigenvalues_sorted(rng):
    w, _ = jacobi_eigh(_random_symmetric(rng, 9))
    assert np.all(np.diff(w) >= 0)


def test_jacobi_scale_invariance(rng):
    # threshold is relative, so rescaled input converges to rescaled output
    a = _random_symmetric(rng, 10)
    w1, _ = jacobi_eigh(a)
    w2, _ = jacobi_eigh(1e6 * a)
    assert np.allclose(w2, 1e6 * w1, rtol=1e-12)


def test_jacobi_zero_and_diagonal():
    w, v = jacobi_eigh(np.zeros((4, 4)))
    assert np.all(w == 0) and np.allclose(v @ v.T, np.eye(4))
    w, _ = jacobi_eigh(np.diag([3.0, -1.0, 2.0]))
    assert np.allclose(w, [-1.0, 2.0, 3.0])


def test_jacobi_rejects_nonsquare():
    with pytest.raises(ValueError):
        jacobi_eigh(np.zeros((2, 3)))


def test_bfs_backends_agree():
    indptr = np.array([0, 2, 4, 6, 8], dtype=np.int64)
    indices = np.array([1, 3, 0, 2, 1, 3, 0, 2], dtype=np.int64)  # C_4
    for s in range(4):
        dc = _speedups.bfs_distances(indptr, indices, s)
        dp = _reference.bfs_distances(indptr, indices, s)
        assert np.array_equal(dc, dp)
    assert _speedups.bfs_distances(indptr, indices, 0).tolist() == [0, 1, 2, 1]


def test_bfs_source_out_of_range():
    indptr = np.array([0, 1, 2], dtype=np.int64)
    indices = np.array([1, 0], dtype=np.int64)
    with pytest.raises(IndexError):
        bfs_distances(indptr, indices, 5)


def test_selected_backend_is_compiled_when_built():
    assert BACKEND == "compiled"
