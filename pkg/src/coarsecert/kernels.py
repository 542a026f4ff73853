"""Kernels on finite graphs: local negative-definiteness and embeddings.

The local test restricts a symmetric kernel to a radius-R ball, projects out
constants, and inspects the top eigenvalue; the correction subtracts the
aggregate positive part over all ball-localized operators, moving no entry by
more than ``b * d**R``.  On top of these sit the per-level radius rule, the
distance-shell control tables, the shell-threshold and spectral removal sets
of the measurable pipeline, and the explicit Hilbert-space coordinates of a
globally negative-definite kernel.

``tol = 1e-9`` is the single cut for every "<= 0" spectral assertion.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import backend
from .graphs import FiniteGraph, GraphError, GraphSeq, ball

__all__ = [
    "SPECTRAL_TOL",
    "KernelError",
    "Kernel",
    "metric_kernel",
    "LocalSpectrumReport",
    "local_spectra",
    "CndVerdict",
    "is_locally_cnd",
    "CorrectionResult",
    "correct_kernel",
    "max_local_radius",
    "ControlTable",
    "control_functions",
    "ShellThresholdLevel",
    "threshold_shells",
    "SpectralRemovalLevel",
    "spectral_removal_set",
    "GnsEmbedding",
    "gns_embed",
    "cnd_oracle",
    "EmbedLevel",
    "EmbedCert",
    "embed_certificate",
    "WeakEmbedLevel",
    "weak_embed_certificate",
    "save_kernel_csv",
    "load_kernel_csv",
    "save_embed_cert",
]

SPECTRAL_TOL = 1e-9


class KernelError(ValueError):
    """Raised for malformed kernels or refused embeddings."""


def exact_fraction(x) -> Fraction:
    """Exact rational view of a parameter; floats go through their repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass
class Kernel:
    """Symmetric real kernel on one level's vertex set."""

    level: int
    matrix: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise KernelError("kernel matrix must be square")
        if not np.array_equal(m, m.T):
            raise KernelError("kernel matrix must be exactly symmetric")
        if not np.all(np.isfinite(m)):
            raise KernelError("kernel entries must be finite")
        self.matrix = m

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def max_diag(self) -> float:
        """Largest |K(x,x)|, the per-level limit-normalization statistic."""
        return float(np.max(np.abs(np.diagonal(self.matrix))))


def metric_kernel(g: FiniteGraph, level: int = 1) -> Kernel:
    """The path-distance kernel K(x,y) = d(x,y)."""
    rows = [backend.bfs_distances(*g._csr, source) for source in range(g.n)]
    return Kernel(level=level, matrix=np.array(rows, dtype=np.float64))


def _center(sub: np.ndarray) -> np.ndarray:
    """Conjugate a symmetric block by the projection against constants."""
    col = sub.mean(axis=0, keepdims=True)
    row = sub.mean(axis=1, keepdims=True)
    return sub - col - row + sub.mean()


def _ball_members(
    g: FiniteGraph, x: int, R: int, active: frozenset[int] | None
) -> np.ndarray:
    members = ball(g, x, R)
    if active is None:
        return members
    return np.array([v for v in members if int(v) in active], dtype=np.int64)


@dataclass
class LocalSpectrumReport:
    """Per-vertex clamped top eigenvalues of the ball-localized operators."""

    radius: int
    vertices: tuple[int, ...]
    values: np.ndarray
    aggregate: float


def local_spectra(
    g: FiniteGraph, k: Kernel, R: int, vertices: Sequence[int] | None = None
) -> LocalSpectrumReport:
    """Top spectrum of the kernel on every zero-sum ball subspace.

    For each vertex x the kernel is restricted to B_R(x), conjugated by the
    projection killing constants, and eigendecomposed; the report keeps
    max(0, top eigenvalue) per vertex and the aggregate maximum.  With
    ``vertices`` given, both the centers and the ball supports are restricted
    to that set (distances stay those of the full graph).
    """
    if R < 1:
        raise KernelError("local spectra need R >= 1")
    if k.n != g.n:
        raise KernelError("kernel size does not match the graph")
    if vertices is None:
        centers = tuple(range(g.n))
        active = None
    else:
        centers = tuple(int(v) for v in vertices)
        active = frozenset(centers)
    K = k.matrix
    values = np.zeros(len(centers))
    for i, x in enumerate(centers):
        members = _ball_members(g, x, R, active)
        if len(members) <= 1:
            continue
        sub = K[np.ix_(members, members)]
        w, _ = backend.jacobi_eigh(_center(sub))
        values[i] = max(0.0, float(w[-1]))
    aggregate = float(values.max()) if len(centers) else 0.0
    return LocalSpectrumReport(
        radius=R, vertices=centers, values=values, aggregate=aggregate
    )


@dataclass
class CndVerdict:
    ok: bool
    witness: int | None
    aggregate: float


def is_locally_cnd(
    g: FiniteGraph,
    k: Kernel,
    R: int,
    tol: float = SPECTRAL_TOL,
    vertices: Sequence[int] | None = None,
) -> CndVerdict:
    """Spectral test for negative definiteness on all radius-R balls.

    Equivalent to quantifying over zero-sum coefficient vectors supported on
    sets of diameter below 2R, since every such set sits inside some ball.
    Returns the offending center when the test fails.
    """
    report = local_spectra(g, k, R, vertices=vertices)
    if report.aggregate <= tol:
        return CndVerdict(ok=True, witness=None, aggregate=report.aggregate)
    worst = int(np.argmax(report.values))
    return CndVerdict(
        ok=False, witness=report.vertices[worst], aggregate=report.aggregate
    )


@dataclass
class CorrectionResult:
    kernel: Kernel
    b: float
    deviation_bound: float


def correct_kernel(
    g: FiniteGraph,
    k: Kernel,
    R: int,
    tol: float = SPECTRAL_TOL,
    vertices: Sequence[int] | None = None,
) -> CorrectionResult:
    """Shift the kernel below its positive ball-local spectra.

    Subtracts ``b`` times the sum over centers of the spectral projections
    onto eigenvalues above ``tol`` of the ball-localized operators, where
    ``b`` is the aggregate from :func:`local_spectra`.  The output stays
    symmetric, moves no entry by more than ``b * d**R``, and passes the local
    test at radius R; a kernel already below ``tol`` is returned unchanged.
    """
    if R < 1:
        raise KernelError("correction needs R >= 1")
    if k.n != g.n:
        raise KernelError("kernel size does not match the graph")
    centers = tuple(range(g.n)) if vertices is None else tuple(int(v) for v in vertices)
    active = None if vertices is None else frozenset(centers)
    K = k.matrix
    decomposed = []  # one eigendecomposition per ball, reused for b and the shift
    b = 0.0
    for x in centers:
        members = _ball_members(g, x, R, active)
        if len(members) <= 1:
            continue
        sub = K[np.ix_(members, members)]
        w, V = backend.jacobi_eigh(_center(sub))
        decomposed.append((members, w, V))
        b = max(b, float(w[-1]))
    bound = b * float(g.degree_bound) ** R
    if b <= tol:
        return CorrectionResult(kernel=k, b=b, deviation_bound=bound)
    shift = np.zeros_like(K)
    for members, w, V in decomposed:
        pos = w > tol
        if not np.any(pos):
            continue
        vpos = V[:, pos]
        shift[np.ix_(members, members)] += vpos @ vpos.T
    corrected = Kernel(level=k.level, matrix=K - b * shift)
    return CorrectionResult(kernel=corrected, b=b, deviation_bound=bound)


def max_local_radius(
    seq: GraphSeq,
    kernels: Sequence[Kernel],
    tol: float = SPECTRAL_TOL,
    R_cap: int | None = None,
) -> list[int]:
    """Largest radius per level at which the corrected kernel stays useful.

    R_i is the largest R with ``b_{i,R} * d**R <= 1/R`` (aggregates below
    ``tol`` count as zero); 0 when already R = 1 fails.  The scan stops at the
    first failing R: enlarging R only grows the zero-sum subspaces, so the
    aggregate is non-decreasing and the qualifying set is an initial segment.
    The search is capped at the diameter (and optionally at ``R_cap``).
    """
    if len(kernels) != len(seq):
        raise KernelError("one kernel per level required")
    d = seq.degree_bound
    radii = []
    for g, k in zip(seq, kernels):
        top = g.diameter if R_cap is None else min(g.diameter, R_cap)
        best = 0
        for R in range(1, top + 1):
            b = local_spectra(g, k, R).aggregate
            if b <= tol:
                best = R
                continue
            # compare in logs: b * d**R <= 1/R without overflowing
            if math.log(b) + R * math.log(d) <= -math.log(R):
                best = R
            else:
                break
        radii.append(best)
    return radii


# ----------------------------------------------------------------------------
# Control functions and the measurable pipeline
# ----------------------------------------------------------------------------


@dataclass
class ControlTable:
    """Monotone envelopes squeezing kernel values by distance shell.

    ``raw_min``/``raw_max`` are per-shell extremes over retained pairs;
    ``rho1`` is the non-decreasing lower envelope (infimum over shells at
    least as far), ``rho2`` the non-decreasing upper envelope (maximum over
    shells at most as far).  ``skipped`` lists empty shells."""

    distances: tuple[int, ...]
    raw_min: tuple[float, ...]
    raw_max: tuple[float, ...]
    rho1: tuple[float, ...]
    rho2: tuple[float, ...]
    skipped: tuple[int, ...]


def _table_from_raw(raw: dict[int, tuple[float, float]]) -> ControlTable:
    dists = sorted(raw)
    mins = [raw[d][0] for d in dists]
    maxs = [raw[d][1] for d in dists]
    rho1 = list(mins)
    for i in range(len(rho1) - 2, -1, -1):
        rho1[i] = min(rho1[i], rho1[i + 1])
    rho2 = list(maxs)
    for i in range(1, len(rho2)):
        rho2[i] = max(rho2[i], rho2[i - 1])
    skipped = tuple(
        d for d in range(dists[0], dists[-1] + 1) if d not in raw
    ) if dists else ()
    return ControlTable(
        distances=tuple(dists),
        raw_min=tuple(mins),
        raw_max=tuple(maxs),
        rho1=tuple(rho1),
        rho2=tuple(rho2),
        skipped=skipped,
    )


def _distance_matrix(g: FiniteGraph) -> np.ndarray:
    return np.array(
        [backend.bfs_distances(*g._csr, source) for source in range(g.n)],
        dtype=np.int64,
    )


def control_functions(
    seq: GraphSeq,
    kernels: Sequence[Kernel],
    retained_mask: Sequence[np.ndarray] | None = None,
) -> tuple[list[ControlTable], ControlTable]:
    """Shell extremes and monotone envelopes, per level and pooled.

    The optional per-level boolean masks mark pairs retained after
    thresholding; distances are always measured in the original graph metric.
    Returns (per-level tables, pooled table).
    """
    if len(kernels) != len(seq):
        raise KernelError("one kernel per level required")
    if retained_mask is not None and len(retained_mask) != len(seq):
        raise KernelError("one retained mask per level required")
    tables = []
    pooled_raw: dict[int, tuple[float, float]] = {}
    for idx, (g, k) in enumerate(zip(seq, kernels)):
        D = _distance_matrix(g)
        K = k.matrix
        mask = None if retained_mask is None else np.asarray(retained_mask[idx], bool)
        raw: dict[int, tuple[float, float]] = {}
        for dist in np.unique(D):
            sel = D == dist
            if mask is not None:
                sel &= mask
            if not np.any(sel):
                continue
            vals = K[sel]
            raw[int(dist)] = (float(vals.min()), float(vals.max()))
        if not raw:
            raise KernelError(f"level {k.level}: every pair masked out")
        tables.append(_table_from_raw(raw))
        for dist, (lo, hi) in raw.items():
            if dist in pooled_raw:
                plo, phi = pooled_raw[dist]
                pooled_raw[dist] = (min(plo, lo), max(phi, hi))
            else:
                pooled_raw[dist] = (lo, hi)
    return tables, _table_from_raw(pooled_raw)


@dataclass
class ShellThresholdLevel:
    """Offending pairs and thresholds of the shell-budget construction.

    ``rho1``/``rho2`` map each distance shell to its accepted thresholds;
    pairs are ordered (both orientations of a symmetric pair appear).  The
    pair mass is counted relative to the level's vertex count."""

    level: int
    low_pairs: tuple[tuple[int, int], ...]
    high_pairs: tuple[tuple[int, int], ...]
    removed: tuple[int, ...]
    rho1: dict[int, float]
    rho2: dict[int, float]
    mass: Fraction
    budget_total: Fraction


def threshold_shells(
    seq: GraphSeq,
    kernels: Sequence[Kernel],
    eps,
    vertices: Sequence[Sequence[int]] | None = None,
) -> list[ShellThresholdLevel]:
    """Per-shell outlier removal under a geometric mass budget.

    For every distance shell k >= 1 the high threshold is the least shell
    value whose tail mass (ordered pairs / |X_i|) stays within eps/2^(k+1),
    and the low threshold the greatest value with the same bound below; when
    no value qualifies the shell keeps everything and the thresholds bracket
    its range.  Offending pairs and their incident vertices are returned; the
    total offending mass never exceeds eps.
    """
    epsf = exact_fraction(eps)
    if epsf <= 0:
        raise KernelError("eps must be positive")
    if len(kernels) != len(seq):
        raise KernelError("one kernel per level required")
    results = []
    for idx, (g, k) in enumerate(zip(seq, kernels)):
        n = g.n
        D = _distance_matrix(g)
        K = k.matrix
        if vertices is None:
            keep = np.arange(n)
        else:
            keep = np.asarray(sorted(int(v) for v in vertices[idx]), dtype=np.int64)
        low_pairs: list[tuple[int, int]] = []
        high_pairs: list[tuple[int, int]] = []
        rho1: dict[int, float] = {}
        rho2: dict[int, float] = {}
        Dk = D[np.ix_(keep, keep)]
        Kk = K[np.ix_(keep, keep)]
        for dist in np.unique(Dk):
            kdist = int(dist)
            if kdist < 1:
                continue
            budget = epsf / 2 ** (kdist + 1)
            sel = Dk == dist
            vals = Kk[sel]
            pairs_i, pairs_j = np.nonzero(sel)
            distinct = np.unique(vals)
            # high side: least value whose tail mass fits the budget
            high_cut = None
            for v in distinct:
                if Fraction(int(np.sum(vals >= v)), n) <= budget:
                    high_cut = float(v)
                    break
            rho2[kdist] = float(distinct[-1]) + 1.0 if high_cut is None else high_cut
            # low side: greatest value whose lower mass fits the budget
            low_cut = None
            for v in distinct[::-1]:
                if Fraction(int(np.sum(vals <= v)), n) <= budget:
                    low_cut = float(v)
                    break
            rho1[kdist] = float(distinct[0]) - 1.0 if low_cut is None else low_cut
            if high_cut is not None:
                for a, bb in zip(pairs_i[vals >= high_cut], pairs_j[vals >= high_cut]):
                    high_pairs.append((int(keep[a]), int(keep[bb])))
            if low_cut is not None:
                for a, bb in zip(pairs_i[vals <= low_cut], pairs_j[vals <= low_cut]):
                    low_pairs.append((int(keep[a]), int(keep[bb])))
        offending = set(low_pairs) | set(high_pairs)
        removed = tuple(sorted({v for pair in offending for v in pair}))
        results.append(
            ShellThresholdLevel(
                level=k.level,
                low_pairs=tuple(sorted(low_pairs)),
                high_pairs=tuple(sorted(high_pairs)),
                removed=removed,
                rho1=rho1,
                rho2=rho2,
                mass=Fraction(len(offending), n),
                budget_total=epsf,
            )
        )
    return results


@dataclass
class SpectralRemovalLevel:
    level: int
    a: float
    removed: tuple[int, ...]
    density: Fraction


def spectral_removal_set(
    seq: GraphSeq,
    kernels: Sequence[Kernel],
    R: int,
    tol: float = SPECTRAL_TOL,
) -> list[SpectralRemovalLevel]:
    """Drop the vertices with the largest local spectra under a 1/i budget.

    At level i the cut ``a_i`` is the least value whose excess set
    {x : b(x) > a_i} holds at most |X_i|/i vertices; with the values sorted
    descending that is the (floor(|X_i|/i)+1)-th largest, clamped at zero.
    Values at or below ``tol`` count as zero.
    """
    if len(kernels) != len(seq):
        raise KernelError("one kernel per level required")
    results = []
    for i, (g, k) in enumerate(zip(seq, kernels), start=1):
        values = local_spectra(g, k, R).values.copy()
        values[values <= tol] = 0.0
        allowance = g.n // i
        if allowance >= g.n:
            a = 0.0
        else:
            desc = np.sort(values)[::-1]
            a = max(0.0, float(desc[allowance]))
        removed = tuple(int(v) for v in np.flatnonzero(values > a))
        assert len(removed) <= allowance or allowance >= g.n
        results.append(
            SpectralRemovalLevel(
                level=k.level,
                a=a,
                removed=removed,
                density=Fraction(len(removed), g.n),
            )
        )
    return results


# ----------------------------------------------------------------------------
# Explicit embeddings
# ----------------------------------------------------------------------------


@dataclass
class GnsEmbedding:
    """Euclidean coordinates realizing a negative-definite kernel.

    ``defect`` is the largest deviation of squared coordinate distances from
    ``K(x,y) - K(x,x)/2 - K(y,y)/2``."""

    basepoint: int
    coordinates: np.ndarray
    defect: float
    gram_eigenvalues: np.ndarray


def gns_embed(
    g: FiniteGraph, k: Kernel, basepoint: int = 0, tol: float = SPECTRAL_TOL
) -> GnsEmbedding:
    """Factor the centered kernel into explicit coordinates.

    Requires the kernel to be globally negative definite on zero-sum vectors
    (checked first).  The Gram matrix at the basepoint is eigendecomposed;
    eigenvalues in [-tol, 0) are clamped to zero and anything below -tol is
    refused.
    """
    if not 0 <= basepoint < g.n:
        raise KernelError(f"basepoint {basepoint} out of range")
    K = k.matrix
    w_global, _ = backend.jacobi_eigh(_center(K))
    if float(w_global[-1]) > tol:
        raise KernelError(
            f"kernel is not globally negative definite (top eigenvalue "
            f"{float(w_global[-1]):.3e} > {tol:.1e})"
        )
    gram = -0.5 * (
        K - K[:, basepoint : basepoint + 1] - K[basepoint : basepoint + 1, :]
        + K[basepoint, basepoint]
    )
    gram = 0.5 * (gram + gram.T)
    w, V = backend.jacobi_eigh(gram)
    if float(w[0]) < -tol:
        raise KernelError(
            f"Gram matrix has eigenvalue {float(w[0]):.3e} below -{tol:.1e}; "
            "kernel refused"
        )
    w = np.clip(w, 0.0, None)
    pos = w > 0.0
    coords = V[:, pos] * np.sqrt(w[pos])
    sq = np.sum(coords**2, axis=1)
    e = sq[:, None] + sq[None, :] - 2.0 * (coords @ coords.T)
    target = K - 0.5 * np.diagonal(K)[:, None] - 0.5 * np.diagonal(K)[None, :]
    defect = float(np.max(np.abs(e - target)))
    return GnsEmbedding(
        basepoint=basepoint, coordinates=coords, defect=defect, gram_eigenvalues=w
    )


def cnd_oracle(
    g: FiniteGraph,
    k: Kernel,
    R: int | None = None,
    tol: float = SPECTRAL_TOL,
    samples: int = 10000,
    seed: int = 0,
) -> bool:
    """Independent negative-definiteness check (power iteration + sampling).

    Never touches the Jacobi path: per ball it runs shifted power iteration
    with one deflation step on the centered block, and evaluates the raw
    quadratic form on ``samples`` random unit zero-sum vectors.  True iff no
    positive value above ``tol`` shows up anywhere.  Capped at n <= 200.
    """
    if g.n > 200:
        raise KernelError("oracle is capped at n <= 200")
    if k.n != g.n:
        raise KernelError("kernel size does not match the graph")
    rng = np.random.default_rng(seed)
    K = k.matrix
    if R is None:
        supports = [np.arange(g.n, dtype=np.int64)]
    else:
        supports = [ball(g, x, R) for x in range(g.n)]

    def power_top(M: np.ndarray) -> float:
        m = M.shape[0]
        shift = float(np.max(np.sum(np.abs(M), axis=1))) + 1.0
        B = M + shift * np.eye(m)
        top = -math.inf
        for _ in range(2):  # second pass runs on the deflated operator
            v = rng.standard_normal(m)
            v /= np.linalg.norm(v)
            lam = 0.0
            for _ in range(500):
                nv = B @ v
                norm = np.linalg.norm(nv)
                if norm == 0.0:
                    break
                nv /= norm
                new_lam = float(nv @ B @ nv)
                if abs(new_lam - lam) <= 1e-13 * max(1.0, abs(new_lam)):
                    lam = new_lam
                    v = nv
                    break
                lam = new_lam
                v = nv
            top = max(top, lam - shift)
            B = B - lam * np.outer(v, v)
        return top

    for members in supports:
        m = len(members)
        if m <= 1:
            continue
        sub = K[np.ix_(members, members)]
        if power_top(_center(sub)) > tol:
            return False
        z = rng.standard_normal((samples, m))
        z -= z.mean(axis=1, keepdims=True)
        norms = np.linalg.norm(z, axis=1)
        z = z[norms > 0] / norms[norms > 0][:, None]
        form = np.einsum("bi,ij,bj->b", z, sub, z)
        if np.any(form > tol):
            return False
    return True


# ----------------------------------------------------------------------------
# Certificates
# ----------------------------------------------------------------------------


@dataclass
class EmbedLevel:
    """One level of the topological-route certificate."""

    level: int
    radius: int
    b: float
    deviation_bound: float
    max_deviation: float
    post_aggregate: float
    corrected: Kernel
    coordinates: np.ndarray | None
    gns_defect: float | None
    gns_note: str | None


@dataclass
class EmbedCert:
    levels: list[EmbedLevel]
    control_tables: list[ControlTable]
    pooled_table: ControlTable
    claims_embeddable: bool


def embed_certificate(
    seq: GraphSeq,
    kernels: Sequence[Kernel] | None = None,
    tol: float = SPECTRAL_TOL,
    R_cap: int | None = None,
    basepoint: int = 0,
) -> EmbedCert:
    """Radius selection, correction, control tables, and coordinates.

    Kernels default to the path metric.  Levels whose radius search fails
    (R_i = 0) keep their kernel uncorrected; coordinates appear when the
    corrected kernel passes the global test, otherwise a note records the
    refusal.  The certificate claims embeddability when every radius is
    positive and the sequence of radii is non-decreasing.
    """
    if kernels is None:
        kernels = [metric_kernel(g, level=i) for i, g in enumerate(seq, start=1)]
    radii = max_local_radius(seq, kernels, tol=tol, R_cap=R_cap)
    levels = []
    corrected_kernels = []
    for g, k, R in zip(seq, kernels, radii):
        if R >= 1:
            result = correct_kernel(g, k, R, tol=tol)
            post = local_spectra(g, result.kernel, R).aggregate
            deviation = float(np.max(np.abs(result.kernel.matrix - k.matrix)))
        else:
            result = CorrectionResult(kernel=k, b=math.inf, deviation_bound=math.inf)
            post = math.inf
            deviation = 0.0
        coords = None
        defect = None
        note = None
        try:
            emb = gns_embed(g, result.kernel, basepoint=basepoint, tol=tol)
            coords = emb.coordinates
            defect = emb.defect
        except KernelError as exc:
            note = str(exc)
        corrected_kernels.append(result.kernel)
        levels.append(
            EmbedLevel(
                level=k.level,
                radius=R,
                b=result.b,
                deviation_bound=result.deviation_bound,
                max_deviation=deviation,
                post_aggregate=post,
                corrected=result.kernel,
                coordinates=coords,
                gns_defect=defect,
                gns_note=note,
            )
        )
    tables, pooled = control_functions(seq, corrected_kernels)
    claims = all(r >= 1 for r in radii) and all(
        radii[i] <= radii[i + 1] for i in range(len(radii) - 1)
    )
    return EmbedCert(
        levels=levels,
        control_tables=tables,
        pooled_table=pooled,
        claims_embeddable=claims,
    )


@dataclass
class WeakEmbedLevel:
    """One level of the measurable-route certificate."""

    level: int
    spectral: SpectralRemovalLevel
    shell: ShellThresholdLevel
    survivor_b: float
    corrected: Kernel | None
    removed_total: tuple[int, ...]
    removed_density: Fraction


def weak_embed_certificate(
    seq: GraphSeq,
    kernels: Sequence[Kernel] | None = None,
    R: int = 2,
    eps=Fraction(1, 2),
    tol: float = SPECTRAL_TOL,
) -> tuple[list[WeakEmbedLevel], list[ControlTable], ControlTable]:
    """Measurable pipeline: spectral removal, shell thresholds, control tables.

    Distances are always those of the original graphs.  Returns the per-level
    records together with the control tables over retained pairs (pairs among
    survivors of both removals, excluding the offending shells).
    """
    if kernels is None:
        kernels = [metric_kernel(g, level=i) for i, g in enumerate(seq, start=1)]
    spectral = spectral_removal_set(seq, kernels, R, tol=tol)
    survivor_sets = [
        [v for v in range(g.n) if v not in set(s.removed)]
        for g, s in zip(seq, spectral)
    ]
    shells = threshold_shells(seq, kernels, eps, vertices=survivor_sets)
    levels = []
    masks = []
    for g, k, sp, sh, survivors in zip(seq, kernels, spectral, shells, survivor_sets):
        report = local_spectra(g, k, R, vertices=survivors) if survivors else None
        survivor_b = report.aggregate if report is not None else 0.0
        corrected = None
        if survivors:
            corrected = correct_kernel(g, k, R, tol=tol, vertices=survivors).kernel
        keep = np.zeros((g.n, g.n), dtype=bool)
        idx = np.array(survivors, dtype=np.int64)
        if len(idx):
            keep[np.ix_(idx, idx)] = True
        for a, bb in sh.low_pairs + sh.high_pairs:
            keep[a, bb] = False
        removed_total = tuple(sorted(set(sp.removed) | set(sh.removed)))
        masks.append(keep)
        levels.append(
            WeakEmbedLevel(
                level=k.level,
                spectral=sp,
                shell=sh,
                survivor_b=survivor_b,
                corrected=corrected,
                removed_total=removed_total,
                removed_density=Fraction(len(removed_total), g.n),
            )
        )
    tables, pooled = control_functions(seq, list(kernels), retained_mask=masks)
    return levels, tables, pooled


# ----------------------------------------------------------------------------
# Files
# ----------------------------------------------------------------------------


def save_kernel_csv(k: Kernel, path: str | Path) -> None:
    """Dense kernel format: header "n", then n rows of n values."""
    lines = [str(k.n)]
    for row in k.matrix:
        lines.append(" ".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def load_kernel_csv(path: str | Path, level: int = 1) -> Kernel:
    """Read a kernel file: dense rows, or "x y value" triplets.

    Triplets are completed symmetrically; unset entries are zero.  A file
    whose body is exactly n rows of n values is read densely; append
    ``sparse`` to the header to force triplet parsing for tiny n.
    """
    rows = [
        line.replace(",", " ").split()
        for line in Path(path).read_text().splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not rows:
        raise KernelError(f"{path}: empty kernel file")
    header = rows[0]
    n = int(header[0])
    force_sparse = len(header) > 1 and header[1] == "sparse"
    body = rows[1:]
    dense = (
        not force_sparse
        and len(body) == n
        and all(len(r) == n for r in body)
    )
    if dense:
        matrix = np.array([[float(v) for v in r] for r in body])
        return Kernel(level=level, matrix=matrix)
    matrix = np.zeros((n, n))
    for r in body:
        if len(r) != 3:
            raise KernelError(f"{path}: bad triplet row {' '.join(r)!r}")
        x, y, value = int(r[0]), int(r[1]), float(r[2])
        if not (0 <= x < n and 0 <= y < n):
            raise KernelError(f"{path}: triplet index out of range")
        if matrix[x, y] not in (0.0, value):
            raise KernelError(f"{path}: conflicting values for entry ({x},{y})")
        matrix[x, y] = value
        matrix[y, x] = value
    return Kernel(level=level, matrix=matrix)


def _table_json(table: ControlTable) -> dict:
    return {
        "distances": list(table.distances),
        "raw_min": [repr(v) for v in table.raw_min],
        "raw_max": [repr(v) for v in table.raw_max],
        "rho1": [repr(v) for v in table.rho1],
        "rho2": [repr(v) for v in table.rho2],
        "skipped": list(table.skipped),
    }


def save_embed_cert(cert: EmbedCert, path: str | Path) -> None:
    """Certificate JSON: radii, spectral data, control tables, coordinates."""
    payload = {
        "claims_embeddable": cert.claims_embeddable,
        "levels": [
            {
                "level": lv.level,
                "R": lv.radius,
                "b": repr(lv.b),
                "C": repr(lv.deviation_bound),
                "max_deviation": repr(lv.max_deviation),
                "post_aggregate": repr(lv.post_aggregate),
                "gns_defect": None if lv.gns_defect is None else repr(lv.gns_defect),
                "gns_note": lv.gns_note,
                "coordinates": None
                if lv.coordinates is None
                else [[repr(float(v)) for v in row] for row in lv.coordinates],
            }
            for lv in cert.levels
        ],
        "control_tables": [_table_json(t) for t in cert.control_tables],
        "pooled_table": _table_json(cert.pooled_table),
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
