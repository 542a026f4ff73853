"""Bounded-size partition certificates and their vertex-removal form.

A level certificate partitions the vertex set into blocks of size strictly
below K; the certificate's cost is the number of edges joining distinct
blocks divided by the vertex count.  The removal form instead names a vertex
set whose incident edges are deleted; both directions of the conversion are
implemented, and every verification recomputes cut data from the assignment
rather than trusting stored values.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .graphs import FiniteGraph, GraphError, GraphSeq

__all__ = [
    "PartitionCert",
    "RemovalCert",
    "PartitionReport",
    "cut_edges_of",
    "make_partition_cert",
    "verify_partition",
    "carve_greedy",
    "refine_local_search",
    "brute_force_optimal",
    "partition_to_removal",
    "removal_to_partition",
    "verify_removal",
    "save_partition_certs",
    "load_partition_certs",
    "save_removal_certs",
    "load_removal_certs",
]


@dataclass
class PartitionCert:
    """One level's block assignment under a strict size cap K."""

    level: int
    K: int
    assignment: tuple[int, ...]
    cut_edges: tuple[tuple[int, int], ...]
    cut_ratio: Fraction


@dataclass
class RemovalCert:
    """One level's removal set: deleting its incident edges caps components."""

    level: int
    K: int
    removed: tuple[int, ...]
    density: Fraction


def cut_edges_of(g: FiniteGraph, assignment: Sequence[int]) -> tuple[tuple[int, int], ...]:
    """Edges whose endpoints live in different blocks."""
    return tuple(
        (u, v) for u, v in g.edges if assignment[u] != assignment[v]
    )


def _block_sizes(assignment: Sequence[int]) -> dict[int, int]:
    sizes: dict[int, int] = {}
    for b in assignment:
        sizes[b] = sizes.get(b, 0) + 1
    return sizes


def make_partition_cert(
    g: FiniteGraph, assignment: Sequence[int], K: int, level: int = 1
) -> PartitionCert:
    """Assemble and validate a certificate from a raw assignment."""
    if len(assignment) != g.n:
        raise GraphError("assignment must cover every vertex")
    if K < 2:
        raise GraphError("size cap K must be >= 2 (blocks need |A| < K)")
    for b, size in _block_sizes(assignment).items():
        if size >= K:
            raise GraphError(f"block {b} has size {size} >= K={K}")
    cut = cut_edges_of(g, assignment)
    return PartitionCert(
        level=level,
        K=K,
        assignment=tuple(int(b) for b in assignment),
        cut_edges=cut,
        cut_ratio=Fraction(len(cut), g.n),
    )


@dataclass
class PartitionReport:
    """Recomputed ratios per level and the tail verdict."""

    ratios: list[Fraction]
    epsilon: Fraction
    tail_start: int
    tail_sup: Fraction
    passed: bool
    stored_mismatches: list[int]


def verify_partition(
    seq: GraphSeq,
    certs: Sequence[PartitionCert],
    epsilon: Fraction | float,
    tail_start: int = 1,
) -> PartitionReport:
    """Recompute every cut set, enforce the size cap, and judge the tail.

    Passes iff the recomputed ratio is at most epsilon on every level >=
    ``tail_start``.  Levels whose stored cut set disagrees with the
    recomputed one are listed, never trusted.
    """
    if len(certs) != len(seq):
        raise GraphError("one certificate per level required")
    eps = Fraction(epsilon) if not isinstance(epsilon, Fraction) else epsilon
    ratios: list[Fraction] = []
    mismatches: list[int] = []
    for g, cert in zip(seq, certs):
        if len(cert.assignment) != g.n:
            raise GraphError(f"level {cert.level}: assignment not total")
        for b, size in _block_sizes(cert.assignment).items():
            if size >= cert.K:
                raise GraphError(
                    f"level {cert.level}: block {b} has size {size} >= K={cert.K}"
                )
        cut = cut_edges_of(g, cert.assignment)
        if tuple(sorted(cert.cut_edges)) != cut:
            mismatches.append(cert.level)
        ratios.append(Fraction(len(cut), g.n))
    tail = ratios[tail_start - 1 :] if tail_start <= len(ratios) else []
    tail_sup = max(tail) if tail else Fraction(0)
    return PartitionReport(
        ratios=ratios,
        epsilon=eps,
        tail_start=tail_start,
        tail_sup=tail_sup,
        passed=tail_sup <= eps,
        stored_mismatches=mismatches,
    )


def carve_greedy(g: FiniteGraph, K: int, level: int = 1) -> PartitionCert:
    """Deterministic ball-growing partition under the strict cap.

    Repeatedly takes the lowest unassigned vertex and grows a BFS ball inside
    the unassigned region, layer by layer in vertex-id order, stopping before
    the block would exceed K-1 vertices.
    """
    if K < 2:
        raise GraphError("size cap K must be >= 2 (blocks need |A| < K)")
    assignment = [-1] * g.n
    block = 0
    for start in range(g.n):
        if assignment[start] != -1:
            continue
        current = [start]
        member = {start}
        while True:
            layer = sorted(
                {
                    w
                    for u in current
                    for w in g.adjacency[u]
                    if assignment[w] == -1 and w not in member
                }
            )
            if not layer or len(member) + len(layer) > K - 1:
                break
            current = layer
            member.update(layer)
        for v in member:
            assignment[v] = block
        block += 1
    return make_partition_cert(g, assignment, K, level=level)


def refine_local_search(
    g: FiniteGraph, cert: PartitionCert, max_iters: int = 100
) -> PartitionCert:
    """Hill-climb single-vertex moves that strictly reduce the cut.

    A vertex may move to a neighboring block with room under the cap.  When
    every improving move is blocked by a full target block, a compound step
    is tried: evict one target member to a fresh block and then apply the
    unblocked move, accepted only when the pair strictly reduces the cut.
    Passes in vertex-id order run until nothing improves or the pass cap is
    hit; the resulting cut never exceeds the input one.
    """
    assignment = list(cert.assignment)
    K = cert.K
    sizes = _block_sizes(assignment)

    def neighbor_counts(v: int) -> dict[int, int]:
        counts: dict[int, int] = {}
        for w in g.adjacency[v]:
            counts[assignment[w]] = counts.get(assignment[w], 0) + 1
        return counts

    def move(v: int, target: int) -> None:
        b = assignment[v]
        sizes[b] -= 1
        if sizes[b] == 0:
            del sizes[b]
        assignment[v] = target
        sizes[target] = sizes.get(target, 0) + 1

    def strict_pass() -> bool:
        moved = False
        for v in range(g.n):
            b = assignment[v]
            counts = neighbor_counts(v)
            home = counts.get(b, 0)
            best_gain = 0
            best_target = None
            for t in sorted(counts):
                if t == b or sizes[t] + 1 >= K:
                    continue
                gain = counts[t] - home
                if gain > best_gain:
                    best_gain = gain
                    best_target = t
            if best_target is not None:
                move(v, best_target)
                moved = True
        return moved

    def relief_move() -> bool:
        fresh = max(sizes) + 1
        for v in range(g.n):
            b = assignment[v]
            counts = neighbor_counts(v)
            home = counts.get(b, 0)
            for t in sorted(counts):
                if t == b or counts[t] <= home or sizes[t] + 1 < K:
                    continue  # only capacity-blocked strict gains
                members = sorted(u for u in range(g.n) if assignment[u] == t)
                for w in members:
                    evict_cost = sum(1 for u in g.adjacency[w] if assignment[u] == t)
                    gain_after = sum(
                        1 for u in g.adjacency[v] if assignment[u] == t and u != w
                    ) - home
                    if evict_cost - gain_after < 0:
                        move(w, fresh)
                        move(v, t)
                        return True
        return False

    for _ in range(max_iters):
        if strict_pass():
            continue
        if not relief_move():
            break
    # compact block ids in first-appearance order for reproducible output
    relabel: dict[int, int] = {}
    for b in assignment:
        if b not in relabel:
            relabel[b] = len(relabel)
    refined = make_partition_cert(
        g, [relabel[b] for b in assignment], K, level=cert.level
    )
    if len(refined.cut_edges) > len(cert.cut_edges):
        raise GraphError("local search increased the cut; this is a bug")
    return refined


def brute_force_optimal(g: FiniteGraph, K: int, level: int = 1) -> PartitionCert:
    """Exact minimum-cut partition with blocks of size < K (n <= 10 only).

    Enumerates restricted-growth strings depth-first, pruning branches whose
    partial cut already matches the best complete one.
    """
    if g.n > 10:
        raise GraphError("brute force is capped at n <= 10")
    if K < 2:
        raise GraphError("size cap K must be >= 2 (blocks need |A| < K)")
    best_cut = g.num_edges + 1
    best_assignment: list[int] | None = None
    assignment = [-1] * g.n
    sizes: list[int] = []

    def dfs(v: int, partial_cut: int) -> None:
        nonlocal best_cut, best_assignment
        if partial_cut >= best_cut:
            return
        if v == g.n:
            best_cut = partial_cut
            best_assignment = assignment[:]
            return
        earlier = [w for w in g.adjacency[v] if w < v]
        used = len(sizes)
        for b in range(used + 1):
            if b < used and sizes[b] + 1 >= K:
                continue
            added = sum(1 for w in earlier if assignment[w] != b)
            assignment[v] = b
            if b == used:
                sizes.append(1)
            else:
                sizes[b] += 1
            dfs(v + 1, partial_cut + added)
            if b == used:
                sizes.pop()
            else:
                sizes[b] -= 1
            assignment[v] = -1

    dfs(0, 0)
    assert best_assignment is not None
    return make_partition_cert(g, best_assignment, K, level=level)


def partition_to_removal(g: FiniteGraph, cert: PartitionCert) -> RemovalCert:
    """Collect the endpoints of the cut edges as the removal set.

    The size of the set is at most twice the cut, well inside the
    2*d*|cut| budget the conversion is allowed.
    """
    cut = cut_edges_of(g, cert.assignment)
    z = sorted({v for e in cut for v in e})
    if len(z) > 2 * g.degree_bound * len(cut):
        raise GraphError("removal set exceeds the conversion bound; this is a bug")
    return RemovalCert(
        level=cert.level,
        K=cert.K,
        removed=tuple(z),
        density=Fraction(len(z), g.n),
    )


def verify_removal(g: FiniteGraph, cert: RemovalCert) -> tuple[bool, int]:
    """Check the component cap after deleting edges incident to the set.

    Returns (ok, largest surviving component size).
    """
    removed = set(cert.removed)
    for v in removed:
        if not 0 <= v < g.n:
            raise GraphError(f"removal vertex {v} out of range")
    seen: set[int] = set()
    largest = 0
    for start in range(g.n):
        if start in removed or start in seen:
            continue
        comp = [start]
        seen.add(start)
        head = 0
        while head < len(comp):
            u = comp[head]
            head += 1
            for w in g.adjacency[u]:
                if w not in removed and w not in seen:
                    seen.add(w)
                    comp.append(w)
        largest = max(largest, len(comp))
    return largest <= cert.K, largest


def removal_to_partition(g: FiniteGraph, cert: RemovalCert) -> PartitionCert:
    """Partition induced by the removal: surviving components plus singletons.

    Removed vertices become singleton blocks.  The returned cap is K+1 since
    surviving components may reach K vertices and partition blocks must stay
    strictly below the cap.
    """
    ok, largest = verify_removal(g, cert)
    if not ok:
        raise GraphError(
            f"component of size {largest} exceeds K={cert.K} after removal"
        )
    removed = set(cert.removed)
    assignment = [-1] * g.n
    block = 0
    for start in range(g.n):
        if assignment[start] != -1:
            continue
        if start in removed:
            assignment[start] = block
            block += 1
            continue
        comp = [start]
        assignment[start] = block
        head = 0
        while head < len(comp):
            u = comp[head]
            head += 1
            for w in g.adjacency[u]:
                if w not in removed and assignment[w] == -1:
                    assignment[w] = block
                    comp.append(w)
        block += 1
    return make_partition_cert(g, assignment, cert.K + 1, level=cert.level)


# ----------------------------------------------------------------------------
# Certificate files
# ----------------------------------------------------------------------------


def save_partition_certs(certs: Sequence[PartitionCert], path: str | Path) -> None:
    payload = [
        {
            "level": c.level,
            "K": c.K,
            "assignment": list(c.assignment),
            "cut_ratio": str(c.cut_ratio),
        }
        for c in certs
    ]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_partition_certs(path: str | Path, seq: GraphSeq) -> list[PartitionCert]:
    """Load certificates, recomputing cut data against the sequence."""
    payload = json.loads(Path(path).read_text())
    certs = []
    for entry in payload:
        level = int(entry["level"])
        g = seq.level(level)
        certs.append(
            make_partition_cert(g, entry["assignment"], int(entry["K"]), level=level)
        )
    return certs


def save_removal_certs(certs: Sequence[RemovalCert], path: str | Path) -> None:
    payload = [
        {
            "level": c.level,
            "K": c.K,
            "Z": list(c.removed),
        }
        for c in certs
    ]
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_removal_certs(path: str | Path, seq: GraphSeq) -> list[RemovalCert]:
    payload = json.loads(Path(path).read_text())
    certs = []
    for entry in payload:
        level = int(entry["level"])
        g = seq.level(level)
        removed = tuple(sorted(int(v) for v in entry["Z"]))
        certs.append(
            RemovalCert(
                level=level,
                K=int(entry["K"]),
                removed=removed,
                density=Fraction(len(removed), g.n),
            )
        )
    return certs
