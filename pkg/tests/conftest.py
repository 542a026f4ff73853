import itertools
from functools import lru_cache

import numpy as np
import pytest

from coarsecert.graphs import FiniteGraph, GraphError


@lru_cache(maxsize=None)
def connected_graphs_up_to_iso(n: int) -> tuple[FiniteGraph, ...]:
    """All connected graphs on n vertices, one per isomorphism class.

    Enumerates every labeled graph as an edge bitmask and keeps the minimum
    encoding over all vertex relabelings (vectorized over the whole family),
    so the dedup is exact.
    """
    pairs = list(itertools.combinations(range(n), 2))
    m = len(pairs)
    pos = {p: i for i, p in enumerate(pairs)}
    codes = np.arange(1 << m, dtype=np.uint64)
    bits = (codes[:, None] >> np.arange(m, dtype=np.uint64)[None, :]) & 1
    weights = (np.uint64(1) << np.arange(m, dtype=np.uint64))[None, :]
    best = codes.copy()
    for perm in itertools.permutations(range(n)):
        mapping = np.array(
            [pos[tuple(sorted((perm[u], perm[v])))] for (u, v) in pairs]
        )
        value = (bits[:, mapping] * weights).sum(axis=1)
        np.minimum(best, value, out=best)
    graphs = []
    for code in np.unique(best):
        edges = [pairs[e] for e in range(m) if (int(code) >> e) & 1]
        try:
            graphs.append(FiniteGraph.from_edges(n, edges))
        except GraphError:
            continue  # disconnected class
    return tuple(graphs)


def random_connected_graph(n: int, rng: np.random.Generator, p: float = 0.4) -> FiniteGraph:
    while True:
        edges = [
            (u, v)
            for u in range(n)
            for v in range(u + 1, n)
            if rng.random() < p
        ]
        try:
            return FiniteGraph.from_edges(n, edges)
        except GraphError:
            continue


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
