"""Kernel spectra, correction, shells, removal sets, and embeddings."""

import math
from fractions import Fraction

import numpy as np
import pytest

from coarsecert.generators import cycle, path, random_regular, torus
from coarsecert.graphs import GraphSeq, ball
from coarsecert.kernels import (
    Kernel,
    KernelError,
    cnd_oracle,
    control_functions,
    correct_kernel,
    embed_certificate,
    gns_embed,
    is_locally_cnd,
    load_kernel_csv,
    local_spectra,
    max_local_radius,
    metric_kernel,
    save_kernel_csv,
    spectral_removal_set,
    threshold_shells,
    weak_embed_certificate,
)

TOL = 1e-9


def noisy_metric_kernel(g, seed, scale=0.5, level=1):
    base = metric_kernel(g, level=level).matrix
    rng = np.random.default_rng(seed)
    noise = np.triu(rng.uniform(-scale, scale, size=base.shape), 1)
    return Kernel(level=level, matrix=base + noise + noise.T)


def test_metric_kernel_examples():
    assert metric_kernel(path(3)).matrix.tolist() == [[0, 1, 2], [1, 0, 1], [2, 1, 0]]
    k = metric_kernel(cycle(4))
    assert k.matrix[0, 2] == 2 and k.matrix[0, 1] == 1
    single = metric_kernel(path(1))
    assert single.matrix.tolist() == [[0.0]]
    assert k.max_diag == 0.0


def test_kernel_validation():
    with pytest.raises(KernelError):
        Kernel(level=1, matrix=np.array([[0.0, 1.0], [2.0, 0.0]]))
    with pytest.raises(KernelError):
        Kernel(level=1, matrix=np.array([[np.inf]]))


def test_local_spectra_examples():
    p3 = path(3)
    const = Kernel(level=1, matrix=np.full((3, 3), 5.0))
    assert local_spectra(p3, const, 2).aggregate == 0.0
    neg = Kernel(level=1, matrix=-metric_kernel(p3).matrix)
    rep = local_spectra(p3, neg, 2)
    assert rep.aggregate > 1.0
    # the offending zero-sum vector (1,-2,1) certifies positivity by hand:
    lam = np.array([1.0, -2.0, 1.0])
    assert lam @ neg.matrix @ lam == 4.0
    sq = Kernel(level=1, matrix=metric_kernel(p3).matrix ** 2)
    assert local_spectra(p3, sq, 2).aggregate <= TOL


def test_is_locally_cnd_examples():
    p3 = path(3)
    neg = Kernel(level=1, matrix=-metric_kernel(p3).matrix)
    verdict = is_locally_cnd(p3, neg, 2)
    assert not verdict.ok and verdict.witness is not None
    for n in (5, 9, 14):
        g = path(n)
        assert is_locally_cnd(g, metric_kernel(g), 3).ok


def test_local_matches_global_when_ball_covers():
    # R at least the diameter reduces the local test to the global one
    rng = np.random.default_rng(7)
    from conftest import random_connected_graph

    for _ in range(6):
        g = random_connected_graph(8, rng)
        a = rng.standard_normal((8, 8))
        k = Kernel(level=1, matrix=a + a.T)
        local = is_locally_cnd(g, k, g.diameter + 1)
        full = np.eye(8) - np.ones((8, 8)) / 8
        top = np.linalg.eigvalsh(full @ k.matrix @ full)[-1]
        assert local.ok == (top <= TOL)
        assert cnd_oracle(g, k) == local.ok


def test_oracle_agreement_seeded(rng):
    from conftest import random_connected_graph

    disagreements = 0
    for trial in range(30):
        n = int(rng.integers(5, 13))
        g = random_connected_graph(n, rng)
        a = rng.standard_normal((n, n))
        kind = trial % 3
        if kind == 0:
            matrix = a + a.T
        elif kind == 1:
            matrix = metric_kernel(g).matrix
        else:
            matrix = metric_kernel(g).matrix + 0.2 * (a + a.T)
        k = Kernel(level=1, matrix=matrix)
        R = int(rng.integers(1, 4))
        if is_locally_cnd(g, k, R).ok != cnd_oracle(g, k, R, seed=trial):
            disagreements += 1
    assert disagreements == 0


def test_correction_soundness_examples():
    p3 = path(3)
    neg = Kernel(level=1, matrix=-metric_kernel(p3).matrix)
    res = correct_kernel(p3, neg, 2)
    assert res.b > 0
    post = local_spectra(p3, res.kernel, 2)
    assert post.aggregate <= TOL
    deviation = np.max(np.abs(res.kernel.matrix - neg.matrix))
    assert deviation <= res.b * 2**2 + 1e-12
    const = Kernel(level=1, matrix=np.full((3, 3), 2.0))
    unchanged = correct_kernel(p3, const, 2)
    assert unchanged.kernel is const and unchanged.b == 0.0


def test_correction_soundness_fuzz():
    for seed in range(8):
        g = random_regular(40, 3, seed=seed)
        k = noisy_metric_kernel(g, seed + 100)
        res = correct_kernel(g, k, 2)
        out = res.kernel.matrix
        assert np.array_equal(out, out.T)
        deviation = float(np.max(np.abs(out - k.matrix)))
        assert deviation <= res.deviation_bound + 1e-12
        # sharp form of the bound: at most b * max ball size
        max_ball = max(len(ball(g, x, 2)) for x in range(g.n))
        assert deviation <= res.b * max_ball + 1e-12
        assert local_spectra(g, res.kernel, 2).aggregate <= TOL
        # diagonal moves at most by the deviation bound
        diag_shift = float(np.max(np.abs(np.diagonal(out) - np.diagonal(k.matrix))))
        assert diag_shift <= res.deviation_bound + 1e-12
        # idempotence: correcting the corrected kernel changes nothing
        again = correct_kernel(g, res.kernel, 2)
        assert again.kernel is res.kernel


def test_max_local_radius_examples():
    p3, p8 = path(3), path(8)
    seq = GraphSeq([p3, p8], degree_bound=2)
    ks = [metric_kernel(p3, 1), metric_kernel(p8, 2)]
    assert max_local_radius(seq, ks) == [2, 7]  # cap at the diameter
    neg = Kernel(level=1, matrix=-metric_kernel(p3).matrix)
    assert max_local_radius(GraphSeq([p3]), [neg]) == [0]
    mixed = GraphSeq([p3, p3], degree_bound=2)
    ks_mixed = [metric_kernel(p3, 1), Kernel(level=2, matrix=-metric_kernel(p3).matrix)]
    assert max_local_radius(mixed, ks_mixed) == [2, 0]


def test_max_local_radius_respects_cap():
    p20 = path(20)
    seq = GraphSeq([p20])
    assert max_local_radius(seq, [metric_kernel(p20)], R_cap=4) == [4]


def test_control_function_examples():
    seq = GraphSeq([path(5)])
    k = metric_kernel(path(5))
    tables, pooled = control_functions(seq, [k])
    t = tables[0]
    assert t.distances == (0, 1, 2, 3, 4)
    assert t.rho1 == (0.0, 1.0, 2.0, 3.0, 4.0)
    assert t.rho2 == (0.0, 1.0, 2.0, 3.0, 4.0)
    assert pooled == t
    doubled = Kernel(level=1, matrix=2 * k.matrix)
    t2 = control_functions(seq, [doubled])[0][0]
    assert t2.rho1 == (0.0, 2.0, 4.0, 6.0, 8.0)


def test_control_tables_monotone_and_squeeze(rng):
    g = torus(4, 4)
    k = noisy_metric_kernel(g, 3, scale=1.0)
    seq = GraphSeq([g])
    tables, _ = control_functions(seq, [k])
    t = tables[0]
    assert all(a <= b for a, b in zip(t.rho1, t.rho1[1:]))
    assert all(a <= b for a, b in zip(t.rho2, t.rho2[1:]))
    D = np.array(_distmat(g))
    for i in range(g.n):
        for j in range(g.n):
            d = D[i, j]
            pos = t.distances.index(d)
            assert t.rho1[pos] <= k.matrix[i, j] <= t.rho2[pos]


def _distmat(g):
    from coarsecert.graphs import bfs_distances

    return [bfs_distances(g, s) for s in range(g.n)]


def test_control_mask_hides_corruption():
    g = cycle(20)
    clean = metric_kernel(g)
    corrupted = clean.matrix.copy()
    corrupted[0, 5] = corrupted[5, 0] = 0.0
    mask = np.ones((20, 20), dtype=bool)
    mask[0, 5] = mask[5, 0] = False
    seq = GraphSeq([g])
    masked, _ = control_functions(
        seq, [Kernel(level=1, matrix=corrupted)], retained_mask=[mask]
    )
    reference, _ = control_functions(seq, [clean])
    assert masked == reference


def test_threshold_shells_examples():
    g = cycle(100)
    seq = GraphSeq([g])
    clean = metric_kernel(g)
    for eps in (2, Fraction(1, 2), "0.25"):
        lvl = threshold_shells(seq, [clean], eps)[0]
        assert lvl.low_pairs == () and lvl.high_pairs == () and lvl.removed == ()
    outlier = clean.matrix.copy()
    outlier[0, 5] = outlier[5, 0] = 1000.0
    lvl = threshold_shells(seq, [Kernel(level=1, matrix=outlier)], 2)[0]
    assert lvl.high_pairs == ((0, 5), (5, 0))
    assert lvl.removed == (0, 5)
    assert lvl.rho2[5] == 1000.0
    assert lvl.mass == Fraction(1, 50)
    low = clean.matrix.copy()
    low[3, 8] = low[8, 3] = -1000.0
    lvl2 = threshold_shells(seq, [Kernel(level=1, matrix=low)], 2)[0]
    assert lvl2.low_pairs == ((3, 8), (8, 3)) and lvl2.removed == (3, 8)


def test_threshold_mass_guarantee_exact(rng):
    for seed in range(5):
        g = random_regular(30, 3, seed=seed)
        k = noisy_metric_kernel(g, seed, scale=2.0)
        for eps in (Fraction(1, 2), Fraction(1, 8)):
            lvl = threshold_shells(GraphSeq([g]), [k], eps)[0]
            assert lvl.mass <= eps  # exact rational comparison
            # per-shell budgets hold side by side
            D = np.array(_distmat(g))
            for dist in sorted(lvl.rho2):
                budget = eps / 2 ** (dist + 1)
                high = sum(1 for (a, b) in lvl.high_pairs if D[a, b] == dist)
                low = sum(1 for (a, b) in lvl.low_pairs if D[a, b] == dist)
                assert Fraction(high, g.n) <= budget
                assert Fraction(low, g.n) <= budget


def test_spectral_removal_examples():
    g = cycle(20)
    km = metric_kernel(g)
    seq10 = GraphSeq([g] * 10)
    bump = km.matrix.copy()
    bump[6, 8] = bump[8, 6] = 60.0
    kernels = [
        Kernel(level=i + 1, matrix=(bump if i == 9 else km.matrix)) for i in range(10)
    ]
    out = spectral_removal_set(seq10, kernels, R=2)
    for lvl in out[:9]:
        assert lvl.a == 0.0 and lvl.removed == ()
    last = out[9]
    assert len(last.removed) <= 20 // 10
    assert last.density <= Fraction(1, 10)
    # level 1 has the full budget: everything may go, a stays 0
    out1 = spectral_removal_set(GraphSeq([g]), [Kernel(level=1, matrix=bump)], R=2)[0]
    assert out1.a == 0.0


def test_spectral_removal_survivors_obey_cut():
    g = cycle(20)
    km = metric_kernel(g).matrix.copy()
    km[6, 8] = km[8, 6] = 60.0
    km[2, 16] = km[16, 2] = 45.0
    k = Kernel(level=1, matrix=km)
    seq = GraphSeq([g] * 5)
    kernels = [Kernel(level=i + 1, matrix=km) for i in range(5)]
    for lvl in spectral_removal_set(seq, kernels, R=2):
        survivors = [v for v in range(20) if v not in set(lvl.removed)]
        rep = local_spectra(g, k, 2, vertices=survivors)
        assert rep.aggregate <= lvl.a + TOL


def test_gns_examples():
    p4 = path(4)
    emb = gns_embed(p4, metric_kernel(p4), basepoint=0)
    assert emb.defect <= 1e-8
    gap = float(np.sum((emb.coordinates[0] - emb.coordinates[3]) ** 2))
    assert abs(gap - 3.0) <= 1e-8
    zero = gns_embed(p4, Kernel(level=1, matrix=np.zeros((4, 4))))
    assert zero.coordinates.shape[1] == 0 or np.allclose(zero.coordinates, 0.0)
    with pytest.raises(KernelError):
        gns_embed(path(3), Kernel(level=1, matrix=-metric_kernel(path(3)).matrix))


def test_gns_defect_bounded_on_larger_kernels():
    for n in (10, 25, 50):
        g = path(n)
        emb = gns_embed(g, metric_kernel(g), basepoint=n // 2)
        assert emb.defect <= 1e-8


def test_embed_certificate_cnd_sequence():
    seq = GraphSeq([path(4), path(6), path(8)], degree_bound=2)
    cert = embed_certificate(seq)
    assert cert.claims_embeddable
    assert [lv.radius for lv in cert.levels] == [3, 5, 7]
    for lv in cert.levels:
        assert lv.post_aggregate <= TOL
        assert lv.max_deviation <= lv.deviation_bound + 1e-12
        assert lv.gns_defect is not None and lv.gns_defect <= 1e-8
    # radii non-decreasing backs the embeddability claim
    radii = [lv.radius for lv in cert.levels]
    assert radii == sorted(radii)


def test_embed_certificate_failing_level():
    p3 = path(3)
    neg = Kernel(level=1, matrix=-metric_kernel(p3).matrix)
    cert = embed_certificate(GraphSeq([p3]), kernels=[neg])
    assert not cert.claims_embeddable
    assert cert.levels[0].radius == 0
    assert cert.levels[0].gns_note is not None


def test_weak_certificate_pipeline():
    g = cycle(20)
    bump = metric_kernel(g).matrix.copy()
    bump[6, 8] = bump[8, 6] = 60.0
    k = Kernel(level=1, matrix=bump)
    levels, tables, pooled = weak_embed_certificate(
        GraphSeq([g]), [k], R=2, eps=Fraction(1, 2)
    )
    lvl = levels[0]
    assert lvl.survivor_b <= lvl.spectral.a + TOL
    assert lvl.shell.mass <= Fraction(1, 2)
    assert set(lvl.spectral.removed) | set(lvl.shell.removed) == set(lvl.removed_total)
    assert tables[0].rho1[0] <= tables[0].rho2[0]
    if lvl.corrected is not None:
        survivors = [v for v in range(20) if v not in set(lvl.spectral.removed)]
        rep = local_spectra(g, lvl.corrected, 2, vertices=survivors)
        assert rep.aggregate <= TOL


def test_kernel_csv_round_trip(tmp_path):
    k = metric_kernel(cycle(7))
    save_kernel_csv(k, tmp_path / "k.csv")
    loaded = load_kernel_csv(tmp_path / "k.csv")
    assert np.array_equal(loaded.matrix, k.matrix)
    (tmp_path / "t.csv").write_text("4 sparse\n0 1 2.5\n2 3 -1.0\n")
    sparse = load_kernel_csv(tmp_path / "t.csv")
    assert sparse.matrix[1, 0] == 2.5 and sparse.matrix[3, 2] == -1.0
    (tmp_path / "bad.csv").write_text("3 sparse\n0 1 2.0\n1 0 3.0\n")
    with pytest.raises(KernelError):
        load_kernel_csv(tmp_path / "bad.csv")
