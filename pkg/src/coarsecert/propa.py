"""Property-A witnesses: construction, verification, and point removal.

A witness assigns every vertex a finitely supported probability vector inside
its radius-S ball.  Verification reports the largest and the average l1 edge
variation per level; the removal machinery restricts a witness to the
complement of a vertex set by conditioning, falling back to a point mass when
a vector loses all surviving support.

Weights are exact ``Fraction`` values throughout, so normalization and the
derived statistics are checked without rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .graphs import FiniteGraph, GraphError, GraphSeq, ball

__all__ = [
    "Witness",
    "VariationReport",
    "uniform_ball_witness",
    "heat_kernel_witness",
    "verify_witness",
    "remove_points",
    "kaiser_radius_bound",
    "AlmostALevel",
    "extract_almost_a",
    "save_witnesses",
    "load_witnesses",
]

NORMALIZATION_TOL = Fraction(1, 10**12)

Vector = dict[int, Fraction]


@dataclass
class Witness:
    """Per-vertex probability vectors with a shared support radius.

    ``vectors`` maps each vertex of the domain (the whole graph, or a subset
    after removal) to its sparse weight map.
    """

    radius: int
    vectors: dict[int, Vector]

    def domain(self) -> list[int]:
        return sorted(self.vectors)

    def vector(self, x: int) -> Vector:
        return self.vectors[x]


def _l1_diff(a: Vector, b: Vector) -> Fraction:
    total = Fraction(0)
    for k in a.keys() | b.keys():
        total += abs(a.get(k, Fraction(0)) - b.get(k, Fraction(0)))
    return total


def uniform_ball_witness(g: FiniteGraph, S: int) -> Witness:
    """Witness whose vector at x is uniform on the ball B_S(x)."""
    if S < 0:
        raise GraphError("radius must be non-negative")
    vectors: dict[int, Vector] = {}
    for x in range(g.n):
        members = ball(g, x, S)
        w = Fraction(1, len(members))
        vectors[x] = {int(v): w for v in members}
    return Witness(radius=S, vectors=vectors)


def heat_kernel_witness(g: FiniteGraph, S: int, t: int | None = None) -> Witness:
    """Lazy-walk witness: t steps of (I+P)/2 from a point mass, truncated to B_S.

    P averages uniformly over neighbors.  After truncation the vector is
    renormalized; weights stay exact rationals.
    """
    if S < 0:
        raise GraphError("radius must be non-negative")
    if t is None:
        t = S
    vectors: dict[int, Vector] = {}
    for x in range(g.n):
        v: Vector = {x: Fraction(1)}
        for _ in range(t):
            nxt: Vector = {}
            for u, mass in v.items():
                half = mass / 2
                nxt[u] = nxt.get(u, Fraction(0)) + half
                deg = len(g.adjacency[u])
                share = half / deg
                for wvtx in g.adjacency[u]:
                    nxt[wvtx] = nxt.get(wvtx, Fraction(0)) + share
            v = nxt
        allowed = set(int(b) for b in ball(g, x, S))
        v = {u: mass for u, mass in v.items() if u in allowed and mass > 0}
        total = sum(v.values(), Fraction(0))
        vectors[x] = {u: mass / total for u, mass in v.items()}
    return Witness(radius=S, vectors=vectors)


@dataclass
class VariationReport:
    """Per-level variation statistics plus structural violations.

    ``max_variation[i]`` is the largest l1 difference over edges of level
    i+1; ``avg_variation[i]`` is the level's averaged ordered-edge sum
    (each edge counted from both endpoints, divided by the level size).
    """

    mode: str
    max_variation: list[Fraction]
    avg_variation: list[Fraction]
    achieved_epsilon: Fraction
    tail_start: int
    normalization_violations: list[tuple[int, int]] = field(default_factory=list)
    support_violations: list[tuple[int, int]] = field(default_factory=list)
    epsilon: Fraction | None = None
    passed: bool | None = None

    def statistic(self, level_index: int) -> Fraction:
        if self.mode == "exact":
            return self.max_variation[level_index]
        return self.avg_variation[level_index]


def _check_structure(
    g: FiniteGraph, w: Witness, report_level: int
) -> tuple[list[tuple[int, int]], list[tuple[int, int]]]:
    norm_bad = []
    supp_bad = []
    for x, vec in w.vectors.items():
        if not 0 <= x < g.n:
            raise GraphError(f"witness vertex {x} out of range at level {report_level}")
        total = sum(vec.values(), Fraction(0))
        if abs(total - 1) > NORMALIZATION_TOL:
            norm_bad.append((report_level, x))
        if any(weight < 0 for weight in vec.values()):
            norm_bad.append((report_level, x))
        allowed = set(int(b) for b in ball(g, x, w.radius))
        if any(u not in allowed for u in vec):
            supp_bad.append((report_level, x))
    return norm_bad, supp_bad


def verify_witness(
    seq: GraphSeq,
    witnesses: Sequence[Witness],
    mode: str = "exact",
    epsilon: Fraction | float | None = None,
    tail_start: int = 1,
) -> VariationReport:
    """Check witness invariants and report per-level edge variation.

    ``mode`` picks the statistic: "exact" uses the per-edge maximum, "average"
    the level-averaged sum over ordered adjacent pairs.  With ``epsilon`` set,
    the report passes iff the structure is sound and the statistic stays
    below epsilon on every level >= ``tail_start``.
    """
    if mode not in ("exact", "average"):
        raise GraphError(f"unknown mode {mode!r}")
    if len(witnesses) != len(seq):
        raise GraphError("one witness per level required")
    max_var: list[Fraction] = []
    avg_var: list[Fraction] = []
    norm_bad: list[tuple[int, int]] = []
    supp_bad: list[tuple[int, int]] = []
    for idx, (g, w) in enumerate(zip(seq, witnesses), start=1):
        nb, sb = _check_structure(g, w, idx)
        norm_bad.extend(nb)
        supp_bad.extend(sb)
        domain = w.vectors.keys()
        level_max = Fraction(0)
        level_sum = Fraction(0)
        for x in domain:
            vx = w.vectors[x]
            for y in g.adjacency[x]:
                if y not in domain:
                    continue
                diff = _l1_diff(vx, w.vectors[y])
                level_sum += diff
                if diff > level_max:
                    level_max = diff
        max_var.append(level_max)
        avg_var.append(level_sum / g.n)
    stats = max_var if mode == "exact" else avg_var
    tail = stats[tail_start - 1 :] if tail_start <= len(stats) else []
    achieved = max(tail) if tail else Fraction(0)
    report = VariationReport(
        mode=mode,
        max_variation=max_var,
        avg_variation=avg_var,
        achieved_epsilon=achieved,
        tail_start=tail_start,
        normalization_violations=norm_bad,
        support_violations=supp_bad,
    )
    if epsilon is not None:
        eps = Fraction(epsilon) if not isinstance(epsilon, Fraction) else epsilon
        report.epsilon = eps
        structurally_ok = not norm_bad and not supp_bad
        report.passed = structurally_ok and all(s < eps for s in tail)
    return report


def kaiser_radius_bound(g: FiniteGraph, S: int) -> int:
    """The ball-cardinality parameter max_y |B_S(y)| quoted after removal."""
    return max(len(ball(g, y, S)) for y in range(g.n))


def remove_points(g: FiniteGraph, w: Witness, W: Iterable[int]) -> Witness:
    """Witness on the complement of W: condition each vector, or fall back to
    a point mass when nothing of it survives.

    Supports stay inside B_S(x) minus W; the radius field is unchanged.
    """
    removed = set(W)
    for x in removed:
        if not 0 <= x < g.n:
            raise GraphError(f"removal vertex {x} out of range")
    survivors = [x for x in w.vectors if x not in removed]
    if not survivors:
        raise GraphError("removal set swallows the whole domain")
    vectors: dict[int, Vector] = {}
    for x in survivors:
        vec = w.vectors[x]
        kept = {u: mass for u, mass in vec.items() if u not in removed and mass > 0}
        total = sum(kept.values(), Fraction(0))
        if total > 0:
            vectors[x] = {u: mass / total for u, mass in kept.items()}
        else:
            vectors[x] = {x: Fraction(1)}
    return Witness(radius=w.radius, vectors=vectors)


@dataclass
class AlmostALevel:
    """Outcome of the removal-set extraction on one level.

    ``k = 0`` means no threshold was feasible: nothing is removed and the
    level claims nothing.
    """

    level: int
    k: int
    threshold: Fraction | None
    removed: tuple[int, ...]
    density: Fraction
    declared_radius: int | None
    restricted: Witness | None


def _vertex_variation_sums(g: FiniteGraph, w: Witness) -> dict[int, Fraction]:
    sums = {x: Fraction(0) for x in w.vectors}
    for x in w.vectors:
        vx = w.vectors[x]
        for y in g.adjacency[x]:
            if y in w.vectors:
                sums[x] += _l1_diff(vx, w.vectors[y])
    return sums


def extract_almost_a(
    seq: GraphSeq, witnesses_by_k: Mapping[int, Sequence[Witness]]
) -> list[AlmostALevel]:
    """Per level, drop the vertices with large local variation.

    For each k the candidate removal set collects the vertices whose summed
    edge variation exceeds 1/k; the level settles on the largest k whose
    candidate set has density at most 1/k, removes it, and restricts the
    matching witness to the complement.
    """
    if not witnesses_by_k:
        raise GraphError("need at least one witness family")
    for k, per_level in witnesses_by_k.items():
        if k < 1:
            raise GraphError("threshold indices k must be >= 1")
        if len(per_level) != len(seq):
            raise GraphError(f"witness family k={k} must cover every level")
        rep = verify_witness(seq, per_level, mode="average")
        if rep.normalization_violations or rep.support_violations:
            raise GraphError(f"witness family k={k} fails structural checks")

    results: list[AlmostALevel] = []
    for idx, g in enumerate(seq, start=1):
        best_k = 0
        best_set: tuple[int, ...] = ()
        for k in sorted(witnesses_by_k):
            w = witnesses_by_k[k][idx - 1]
            sums = _vertex_variation_sums(g, w)
            cut = Fraction(1, k)
            z = tuple(sorted(x for x, s in sums.items() if s > cut))
            if Fraction(len(z), g.n) <= cut and k > best_k:
                best_k = k
                best_set = z
        if best_k == 0:
            results.append(
                AlmostALevel(
                    level=idx,
                    k=0,
                    threshold=None,
                    removed=(),
                    density=Fraction(0),
                    declared_radius=None,
                    restricted=None,
                )
            )
            continue
        w = witnesses_by_k[best_k][idx - 1]
        restricted = (
            remove_points(g, w, best_set) if len(best_set) < g.n else None
        )
        results.append(
            AlmostALevel(
                level=idx,
                k=best_k,
                threshold=Fraction(1, best_k),
                removed=best_set,
                density=Fraction(len(best_set), g.n),
                declared_radius=kaiser_radius_bound(g, w.radius),
                restricted=restricted,
            )
        )
    return results


def save_witnesses(witnesses: Sequence[Witness], path: str | Path) -> None:
    """Write rows "level vertex support_vertex weight" (weights as p/q)."""
    lines = []
    for level, w in enumerate(witnesses, start=1):
        lines.append(f"# radius {w.radius} level {level}")
        for x in sorted(w.vectors):
            for u in sorted(w.vectors[x]):
                lines.append(f"{level} {x} {u} {w.vectors[x][u]}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_witnesses(path: str | Path) -> list[Witness]:
    """Read the witness row format written by :func:`save_witnesses`."""
    radii: dict[int, int] = {}
    rows: dict[int, dict[int, Vector]] = {}
    for line in Path(path).read_text().splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            tokens = stripped[1:].split()
            if len(tokens) == 4 and tokens[0] == "radius" and tokens[2] == "level":
                radii[int(tokens[3])] = int(tokens[1])
            continue
        tokens = stripped.replace(",", " ").split()
        if len(tokens) != 4:
            raise GraphError(f"bad witness row {stripped!r}")
        level, x, u = int(tokens[0]), int(tokens[1]), int(tokens[2])
        rows.setdefault(level, {}).setdefault(x, {})[u] = Fraction(tokens[3])
    if not rows:
        raise GraphError(f"{path}: no witness rows")
    witnesses = []
    for level in sorted(rows):
        radius = radii.get(level)
        if radius is None:
            raise GraphError(f"{path}: missing radius header for level {level}")
        witnesses.append(Witness(radius=radius, vectors=rows[level]))
    return witnesses
