"""Test-sequence builders and local-statistics diagnostics.

Families: cycles, discrete tori, paths, random regular graphs (pairing model),
and Schreier graphs of permutation actions.  Diagnostics: girth, injectivity
of almost-actions over word lists, and rooted-ball frequency profiles.

All randomness flows through ``numpy.random.default_rng`` (PCG64) under one
explicit 64-bit seed, so every generated graph is bit-reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .graphs import FiniteGraph, GraphError, GraphSeq

__all__ = [
    "cycle",
    "torus",
    "path",
    "random_regular",
    "generate",
    "girth",
    "PermAction",
    "Word",
    "apply_word",
    "word_permutation",
    "schreier_graph",
    "InjectivityReport",
    "injectivity_report",
    "RootedBall",
    "BallProfile",
    "ball_profile",
    "rooted_isomorphic",
    "load_perm_action",
    "load_words",
]

# A word is a tuple of signed 1-based generator indices: +k applies generator
# k, -k its inverse, rightmost letter first.  The empty tuple is the identity.
Word = tuple[int, ...]


def cycle(n: int) -> FiniteGraph:
    """Cycle C_n, n >= 3."""
    if n < 3:
        raise GraphError("cycle needs n >= 3")
    edges = [(i, (i + 1) % n) for i in range(n)]
    return FiniteGraph.from_edges(n, edges, degree_bound=2)


def path(n: int) -> FiniteGraph:
    """Path P_n on n vertices (a single vertex when n = 1)."""
    if n < 1:
        raise GraphError("path needs n >= 1")
    edges = [(i, i + 1) for i in range(n - 1)]
    return FiniteGraph.from_edges(n, edges, degree_bound=2)


def torus(w: int, h: int) -> FiniteGraph:
    """Discrete torus Z_w x Z_h with 4-neighbor wrap-around; sides >= 3."""
    if w < 3 or h < 3:
        raise GraphError("torus sides must be >= 3 to stay simple")

    def vid(r: int, c: int) -> int:
        return (r % h) * w + (c % w)

    edges = []
    for r in range(h):
        for c in range(w):
            edges.append((vid(r, c), vid(r, c + 1)))
            edges.append((vid(r, c), vid(r + 1, c)))
    return FiniteGraph.from_edges(w * h, edges, degree_bound=4)


def random_regular(n: int, d: int, seed: int, max_tries: int = 10000) -> FiniteGraph:
    """Random simple connected d-regular graph via the pairing model.

    Stubs are shuffled and paired; samples with loops, repeated edges, or a
    disconnected result are rejected wholesale and redrawn, so the output is
    a deterministic function of (n, d, seed).
    """
    if d < 3:
        raise GraphError("random_regular needs d >= 3")
    if d >= n:
        raise GraphError("random_regular needs d < n")
    if (n * d) % 2 != 0:
        raise GraphError("random_regular needs n*d even")
    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        stubs = np.repeat(np.arange(n, dtype=np.int64), d)
        rng.shuffle(stubs)
        pairs = stubs.reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        canon = {(int(min(u, v)), int(max(u, v))) for u, v in pairs}
        if len(canon) != len(pairs):
            continue
        try:
            return FiniteGraph.from_edges(n, sorted(canon), degree_bound=d)
        except GraphError:
            continue  # disconnected sample
    raise GraphError(f"no simple connected {d}-regular graph found in {max_tries} tries")


def generate(spec: str) -> FiniteGraph:
    """Build a graph from a one-line family spec.

    Grammar: ``cycle N`` | ``path N`` | ``torus W H`` |
    ``random_regular N D SEED``.
    """
    tokens = spec.split()
    if not tokens:
        raise GraphError("empty generator spec")
    family, args = tokens[0], [int(t) for t in tokens[1:]]
    if family == "cycle" and len(args) == 1:
        return cycle(args[0])
    if family == "path" and len(args) == 1:
        return path(args[0])
    if family == "torus" and len(args) == 2:
        return torus(args[0], args[1])
    if family == "random_regular" and len(args) == 3:
        return random_regular(args[0], args[1], args[2])
    raise GraphError(f"unrecognized generator spec {spec!r}")


def girth(g: FiniteGraph) -> int | float:
    """Length of the shortest cycle; ``math.inf`` for forests."""
    best = math.inf
    for root in range(g.n):
        dist = np.full(g.n, -1, dtype=np.int64)
        parent = np.full(g.n, -1, dtype=np.int64)
        dist[root] = 0
        queue = [root]
        head = 0
        while head < len(queue):
            u = queue[head]
            head += 1
            if dist[u] * 2 >= best:
                break
            for w in g.adjacency[u]:
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    parent[w] = u
                    queue.append(w)
                elif w != parent[u]:
                    best = min(best, int(dist[u] + dist[w] + 1))
        if best == 3:
            break
    return best


# ----------------------------------------------------------------------------
# Permutation actions and Schreier graphs
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class PermAction:
    """Generator permutations of {0..n-1}; formal inverses are derived."""

    n: int
    generators: tuple[tuple[int, ...], ...]
    names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.n <= 0:
            raise GraphError("action needs a nonempty point set")
        if not self.generators:
            raise GraphError("action needs at least one generator")
        if not self.names:
            object.__setattr__(
                self, "names", tuple(f"s{i + 1}" for i in range(len(self.generators)))
            )
        if len(self.names) != len(self.generators):
            raise GraphError("one name per generator required")
        for perm in self.generators:
            if sorted(perm) != list(range(self.n)):
                raise GraphError("generator is not a permutation")


@lru_cache(maxsize=64)
def _action_arrays(action: PermAction) -> tuple[tuple[np.ndarray, ...], tuple[np.ndarray, ...]]:
    fwd = tuple(np.array(p, dtype=np.int64) for p in action.generators)
    inv = []
    for p in fwd:
        q = np.empty_like(p)
        q[p] = np.arange(action.n, dtype=np.int64)
        inv.append(q)
    return fwd, tuple(inv)


def word_permutation(action: PermAction, word: Word) -> np.ndarray:
    """The permutation array of a word (rightmost letter applied first)."""
    fwd, inv = _action_arrays(action)
    result = np.arange(action.n, dtype=np.int64)
    for letter in word:
        if letter == 0:
            raise GraphError("word letters are signed 1-based indices; 0 is invalid")
        k = abs(letter) - 1
        if k >= len(fwd):
            raise GraphError(f"word letter {letter} exceeds generator count")
        table = fwd[k] if letter > 0 else inv[k]
        result = result[table]  # pre-compose: apply `table` first
    return result


def apply_word(action: PermAction, word: Word, point: int) -> int:
    """Image of one point under a word."""
    return int(word_permutation(action, word)[point])


def schreier_graph(action: PermAction) -> tuple[FiniteGraph, dict[tuple[int, int], tuple[int, ...]]]:
    """Graph on {0..n-1} joining x to s.x for every generator s.

    Parallel edges collapse; fixed points produce no edge.  Returns the graph
    plus a side table mapping each edge (u, v), u < v, to the sorted 1-based
    generator indices realizing it.  A disconnected result is an error.
    """
    labels: dict[tuple[int, int], set[int]] = {}
    for gi, perm in enumerate(action.generators, start=1):
        for x, y in enumerate(perm):
            if x == y:
                continue
            key = (x, y) if x < y else (y, x)
            labels.setdefault(key, set()).add(gi)
    try:
        g = FiniteGraph.from_edges(
            action.n, labels.keys(), degree_bound=2 * len(action.generators)
        )
    except GraphError as exc:
        raise GraphError(f"Schreier graph invalid: {exc}") from exc
    return g, {e: tuple(sorted(s)) for e, s in sorted(labels.items())}


@dataclass
class InjectivityReport:
    """Fraction of points where the almost-action multiplies and acts freely."""

    good_fraction: Fraction
    epsilon: Fraction
    good_set: tuple[int, ...]


def injectivity_report(action: PermAction, F: Sequence[Word]) -> InjectivityReport:
    """Evaluate the injectivity conditions of an almost-action on a word list.

    A point y is good when sigma(g)sigma(h)(y) = sigma(gh)(y) for all g, h in
    F (gh read as concatenation) and sigma(g)(y) != y for every nonidentity
    (nonempty) g in F.  epsilon is the exact fraction of bad points.
    """
    if not F:
        raise GraphError("F must be nonempty")
    words = [tuple(w) for w in F]
    perms = {w: word_permutation(action, w) for w in words}
    identity = np.arange(action.n, dtype=np.int64)
    good = np.ones(action.n, dtype=bool)
    for g in words:
        for h in words:
            gh = g + h
            if gh not in perms:
                perms[gh] = word_permutation(action, gh)
            good &= perms[g][perms[h]] == perms[gh]
    for g in words:
        if g:
            good &= perms[g] != identity
    y = tuple(int(v) for v in np.flatnonzero(good))
    frac = Fraction(len(y), action.n)
    return InjectivityReport(good_fraction=frac, epsilon=1 - frac, good_set=y)


# ----------------------------------------------------------------------------
# Rooted balls and Benjamini-Schramm style profiles
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class RootedBall:
    """Induced ball subgraph relabeled 0..m-1 with the root at 0.

    Vertices are ordered by (distance to root, original id); ``dist`` keeps
    the distance of each label to the root.
    """

    adjacency: tuple[tuple[int, ...], ...]
    dist: tuple[int, ...]

    @classmethod
    def from_graph(cls, g: FiniteGraph, root: int, R: int) -> RootedBall:
        full_dist = {root: 0}
        frontier = [root]
        depth = 0
        while frontier and depth < R:
            depth += 1
            nxt = []
            for u in frontier:
                for w in g.adjacency[u]:
                    if w not in full_dist:
                        full_dist[w] = depth
                        nxt.append(w)
            frontier = nxt
        order = sorted(full_dist, key=lambda v: (full_dist[v], v))
        relabel = {v: i for i, v in enumerate(order)}
        adjacency = tuple(
            tuple(sorted(relabel[w] for w in g.adjacency[v] if w in relabel))
            for v in order
        )
        return cls(adjacency=adjacency, dist=tuple(full_dist[v] for v in order))

    @property
    def size(self) -> int:
        return len(self.dist)

    def invariant_key(self) -> tuple:
        """Cheap iso-invariant used to bucket balls before exact matching."""
        per_vertex = sorted(
            (self.dist[v], len(nbrs), tuple(sorted(self.dist[w] for w in nbrs)))
            for v, nbrs in enumerate(self.adjacency)
        )
        return (self.size, tuple(per_vertex))


def rooted_isomorphic(a: RootedBall, b: RootedBall) -> bool:
    """Exact root-preserving isomorphism test by backtracking.

    Candidates are pruned by distance to root, degree, and consistency with
    the partial assignment; feasible because balls are tiny.
    """
    if a.size != b.size or a.dist != b.dist:
        return False
    m = a.size
    assign = [-1] * m  # a-label -> b-label
    used = [False] * m

    deg_a = [len(x) for x in a.adjacency]
    deg_b = [len(x) for x in b.adjacency]

    def candidates(v: int) -> Iterable[int]:
        for w in range(m):
            if used[w] or a.dist[v] != b.dist[w] or deg_a[v] != deg_b[w]:
                continue
            ok = True
            for u in a.adjacency[v]:
                if assign[u] != -1 and assign[u] not in b.adjacency[w]:
                    ok = False
                    break
            if ok:
                # reverse direction: assigned b-neighbors of w must map back
                for x in b.adjacency[w]:
                    src = assign_inv.get(x)
                    if src is not None and v not in a.adjacency[src]:
                        ok = False
                        break
            if ok:
                yield w

    assign_inv: dict[int, int] = {}

    def extend(v: int) -> bool:
        if v == m:
            return True
        for w in candidates(v):
            assign[v] = w
            used[w] = True
            assign_inv[w] = v
            if extend(v + 1):
                return True
            assign[v] = -1
            used[w] = False
            del assign_inv[w]
        return False

    return extend(0)


@dataclass
class BallProfile:
    """Frequencies of rooted R-ball isomorphism classes in one graph.

    ``classes`` pairs each class representative (the first ball seen, in
    BFS-from-root labels) with its exact frequency; frequencies sum to 1.
    """

    radius: int
    classes: tuple[tuple[RootedBall, Fraction], ...]

    def frequency_of(self, reference: RootedBall) -> Fraction:
        for rep, freq in self.classes:
            if rooted_isomorphic(rep, reference):
                return freq
        return Fraction(0)


def _profile_one(g: FiniteGraph, R: int) -> BallProfile:
    buckets: dict[tuple, list[int]] = {}
    reps: list[RootedBall] = []
    counts: list[int] = []
    for v in range(g.n):
        rb = RootedBall.from_graph(g, v, R)
        key = rb.invariant_key()
        hit = None
        for idx in buckets.get(key, ()):
            if rooted_isomorphic(reps[idx], rb):
                hit = idx
                break
        if hit is None:
            buckets.setdefault(key, []).append(len(reps))
            reps.append(rb)
            counts.append(1)
        else:
            counts[hit] += 1
    classes = tuple((rep, Fraction(c, g.n)) for rep, c in zip(reps, counts))
    return BallProfile(radius=R, classes=classes)


def ball_profile(
    seq: GraphSeq, R: int, reference: RootedBall | None = None
) -> tuple[list[BallProfile], list[Fraction] | None]:
    """Per-level rooted-ball class frequencies, plus reference frequencies.

    When a reference ball is given, the second element holds, per level, the
    exact frequency of the class isomorphic to it (for the caller to inspect
    along the tail).
    """
    if R < 0:
        raise GraphError("radius must be non-negative")
    profiles = [_profile_one(g, R) for g in seq]
    if reference is None:
        return profiles, None
    return profiles, [p.frequency_of(reference) for p in profiles]


# ----------------------------------------------------------------------------
# File formats
# ----------------------------------------------------------------------------


def load_perm_action(path: str | Path) -> PermAction:
    """Read an action file: first line "n k", then k permutation rows."""
    rows = [
        line.split()
        for line in Path(path).read_text().splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not rows or len(rows[0]) != 2:
        raise GraphError(f"{path}: header must be 'n k'")
    n, k = int(rows[0][0]), int(rows[0][1])
    if len(rows) != k + 1:
        raise GraphError(f"{path}: expected {k} permutation rows")
    gens = []
    for row in rows[1:]:
        if len(row) != n:
            raise GraphError(f"{path}: permutation row must list {n} images")
        gens.append(tuple(int(t) for t in row))
    return PermAction(n=n, generators=tuple(gens))


def load_words(path: str | Path) -> list[Word]:
    """Read a word list: one word per line as signed integers; 'e' = identity."""
    words: list[Word] = []
    for line in Path(path).read_text().splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if stripped == "e":
            words.append(())
            continue
        words.append(tuple(int(t) for t in stripped.split()))
    return words
