"""Finite bounded-degree graphs, their path metrics, and metrized sequences.

A sequence of graphs is treated as one disjoint-union space: within a level
the distance is the usual shortest-path metric, across levels i and j it is
``diam(X_i) + diam(X_j) + i + j`` (levels are 1-based).  All distances are
exact integers.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import backend

__all__ = [
    "GraphError",
    "FiniteGraph",
    "GraphSeq",
    "CoarsePoint",
    "bfs_distances",
    "ball",
    "diameter",
    "coarse_distance",
    "load_graph",
    "save_graph",
    "load_sequence",
]


class GraphError(ValueError):
    """Raised when input fails the structural graph invariants."""


@dataclass
class FiniteGraph:
    """Simple connected undirected graph with a declared degree bound.

    ``adjacency`` holds one sorted neighbor tuple per vertex.  Instances are
    immutable after construction and safe to share across threads.
    """

    n: int
    adjacency: tuple[tuple[int, ...], ...]
    degree_bound: int

    def __post_init__(self) -> None:
        if self.n <= 0:
            raise GraphError("graph needs at least one vertex")
        if len(self.adjacency) != self.n:
            raise GraphError("adjacency length does not match vertex count")
        neighbor_sets = []
        for u, nbrs in enumerate(self.adjacency):
            s = set(nbrs)
            if u in s:
                raise GraphError(f"self-loop at vertex {u}")
            if len(s) != len(nbrs):
                raise GraphError(f"duplicate neighbor at vertex {u}")
            if tuple(sorted(nbrs)) != tuple(nbrs):
                raise GraphError(f"neighbors of {u} not sorted")
            if len(nbrs) > self.degree_bound:
                raise GraphError(
                    f"degree {len(nbrs)} of vertex {u} exceeds bound {self.degree_bound}"
                )
            for w in nbrs:
                if not 0 <= w < self.n:
                    raise GraphError(f"neighbor {w} of {u} out of range")
            neighbor_sets.append(s)
        for u, s in enumerate(neighbor_sets):
            for w in s:
                if u not in neighbor_sets[w]:
                    raise GraphError(f"edge {u}-{w} not symmetric")
        if self._bfs(0).min() < 0:
            raise GraphError("graph is not connected")

    @classmethod
    def from_edges(
        cls, n: int, edges: Iterable[tuple[int, int]], degree_bound: int | None = None
    ) -> FiniteGraph:
        """Build from an undirected edge list; infers the bound when omitted."""
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u},{v}) out of range for n={n}")
            if u == v:
                raise GraphError(f"self-loop at vertex {u}")
            nbrs[u].add(v)
            nbrs[v].add(u)
        adjacency = tuple(tuple(sorted(s)) for s in nbrs)
        if degree_bound is None:
            degree_bound = max((len(s) for s in nbrs), default=0)
        return cls(n=n, adjacency=adjacency, degree_bound=degree_bound)

    def with_degree_bound(self, degree_bound: int) -> FiniteGraph:
        """Same graph re-declared under a (larger) shared bound."""
        return FiniteGraph(self.n, self.adjacency, degree_bound)

    @cached_property
    def _csr(self) -> tuple[np.ndarray, np.ndarray]:
        degrees = np.fromiter(
            (len(a) for a in self.adjacency), dtype=np.int64, count=self.n
        )
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(degrees, out=indptr[1:])
        indices = np.fromiter(
            (w for a in self.adjacency for w in a),
            dtype=np.int64,
            count=int(indptr[-1]),
        )
        return indptr, indices

    def _bfs(self, source: int) -> np.ndarray:
        indptr, indices = self._csr
        return backend.bfs_distances(indptr, indices, source)

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Undirected edges as (u, v) with u < v, sorted."""
        return tuple(
            (u, w) for u in range(self.n) for w in self.adjacency[u] if u < w
        )

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def diameter(self) -> int:
        return max(int(self._bfs(v).max()) for v in range(self.n))

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])


def bfs_distances(g: FiniteGraph, source: int) -> np.ndarray:
    """Hop distances from ``source`` to every vertex (int64, all finite)."""
    if not 0 <= source < g.n:
        raise GraphError(f"source {source} out of range for n={g.n}")
    return g._bfs(source)


def ball(g: FiniteGraph, x: int, R: int) -> np.ndarray:
    """Vertices within distance R of x, sorted ascending."""
    if R < 0:
        raise GraphError("radius must be non-negative")
    if not 0 <= x < g.n:
        raise GraphError(f"vertex {x} out of range for n={g.n}")
    seen = {x}
    frontier = [x]
    for _ in range(R):
        if not frontier:
            break
        nxt = []
        for u in frontier:
            for w in g.adjacency[u]:
                if w not in seen:
                    seen.add(w)
                    nxt.append(w)
        frontier = nxt
    return np.array(sorted(seen), dtype=np.int64)


def diameter(g: FiniteGraph) -> int:
    """Largest pairwise distance (finite by connectivity)."""
    return g.diameter


@dataclass
class GraphSeq:
    """Ordered levels of a graph sequence, 1-based, one shared degree bound."""

    levels: tuple[FiniteGraph, ...]
    degree_bound: int = field(init=False)

    def __init__(self, levels: Sequence[FiniteGraph], degree_bound: int | None = None):
        levels = tuple(levels)
        if not levels:
            raise GraphError("a sequence needs at least one level")
        if degree_bound is not None:
            levels = tuple(g.with_degree_bound(degree_bound) for g in levels)
        bounds = {g.degree_bound for g in levels}
        if len(bounds) > 1:
            raise GraphError(
                f"levels declare different degree bounds {sorted(bounds)}; "
                "pass an explicit shared bound"
            )
        object.__setattr__(self, "levels", levels)
        object.__setattr__(self, "degree_bound", bounds.pop())

    def __len__(self) -> int:
        return len(self.levels)

    def __iter__(self):
        return iter(self.levels)

    def level(self, i: int) -> FiniteGraph:
        """Graph at 1-based level i."""
        if not 1 <= i <= len(self.levels):
            raise GraphError(f"level {i} out of range 1..{len(self.levels)}")
        return self.levels[i - 1]


class CoarsePoint(NamedTuple):
    """A vertex of the disjoint union: (1-based level, vertex id)."""

    level: int
    vertex: int


def _check_point(seq: GraphSeq, p: CoarsePoint) -> FiniteGraph:
    g = seq.level(p.level)
    if not 0 <= p.vertex < g.n:
        raise GraphError(f"vertex {p.vertex} out of range at level {p.level}")
    return g


def coarse_distance(seq: GraphSeq, p: CoarsePoint, q: CoarsePoint) -> int:
    """Distance in the metrized disjoint union (exact integer).

    Same level: shortest-path distance.  Different levels i, j:
    ``diam(X_i) + diam(X_j) + i + j``.
    """
    gp = _check_point(seq, p)
    gq = _check_point(seq, q)
    if p.level == q.level:
        return int(bfs_distances(gp, p.vertex)[q.vertex])
    return gp.diameter + gq.diameter + p.level + q.level


def save_graph(g: FiniteGraph, path: str | Path) -> None:
    """Write the edge-list format: header "n m d", then one "u v" per edge."""
    lines = [f"{g.n} {g.num_edges} {g.degree_bound}"]
    lines.extend(f"{u} {v}" for u, v in g.edges)
    Path(path).write_text("\n".join(lines) + "\n")


def load_graph(path: str | Path) -> FiniteGraph:
    """Read the edge-list format; rejects malformed or disconnected input."""
    tokens_per_line = [
        line.split()
        for line in Path(path).read_text().splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not tokens_per_line:
        raise GraphError(f"{path}: empty graph file")
    header = tokens_per_line[0]
    if len(header) != 3:
        raise GraphError(f"{path}: header must be 'n m d'")
    n, m, d = (int(t) for t in header)
    body = tokens_per_line[1:]
    if len(body) != m:
        raise GraphError(f"{path}: expected {m} edges, found {len(body)}")
    edges = []
    for t in body:
        if len(t) != 2:
            raise GraphError(f"{path}: bad edge line {' '.join(t)!r}")
        edges.append((int(t[0]), int(t[1])))
    return FiniteGraph.from_edges(n, edges, degree_bound=d)


def load_sequence(path: str | Path) -> GraphSeq:
    """Read a sequence file: one graph file path per line, ordered by level.

    Relative paths resolve against the sequence file's directory.  The shared
    bound is the max declared bound across levels.
    """
    path = Path(path)
    names = [
        line.strip()
        for line in path.read_text().splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not names:
        raise GraphError(f"{path}: no graph files listed")
    graphs = [load_graph(path.parent / name) for name in names]
    shared = max(g.degree_bound for g in graphs)
    return GraphSeq(graphs, degree_bound=shared)
