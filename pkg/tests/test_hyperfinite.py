"""Partition certificates: search, verification, and form conversion."""

from dataclasses import replace
from fractions import Fraction

import pytest

from coarsecert.generators import cycle, path, random_regular, torus
from coarsecert.graphs import FiniteGraph, GraphError, GraphSeq
from coarsecert.hyperfinite import (
    PartitionCert,
    RemovalCert,
    brute_force_optimal,
    carve_greedy,
    cut_edges_of,
    load_partition_certs,
    load_removal_certs,
    make_partition_cert,
    partition_to_removal,
    refine_local_search,
    removal_to_partition,
    save_partition_certs,
    save_removal_certs,
    verify_partition,
    verify_removal,
)


def star(k):
    return FiniteGraph.from_edges(k + 1, [(0, i) for i in range(1, k + 1)])


def block_sizes(cert):
    sizes = {}
    for b in cert.assignment:
        sizes[b] = sizes.get(b, 0) + 1
    return sorted(sizes.values())


def test_carve_greedy_examples():
    cert = carve_greedy(cycle(10), 6)
    assert block_sizes(cert) == [5, 5]
    assert len(cert.cut_edges) == 2
    assert carve_greedy(cycle(10), 11).cut_ratio == 0
    s5 = carve_greedy(star(5), 2)
    assert len(s5.cut_edges) == 5 and s5.cut_ratio == Fraction(5, 6)
    assert block_sizes(s5) == [1] * 6


def test_verify_partition_examples():
    c4 = cycle(4)
    singles = make_partition_cert(c4, [0, 1, 2, 3], 2)
    rep = verify_partition(GraphSeq([c4]), [singles], epsilon=1)
    assert rep.ratios == [Fraction(1)]
    c10 = cycle(10)
    arcs = make_partition_cert(c10, [0] * 5 + [1] * 5, 6)
    rep = verify_partition(GraphSeq([c10]), [arcs], epsilon=Fraction(1, 5))
    assert rep.ratios == [Fraction(1, 5)] and rep.passed
    whole = make_partition_cert(c4, [0] * 4, 5)
    assert verify_partition(GraphSeq([c4]), [whole], epsilon=0).passed


def test_verify_recomputes_cut_edges():
    c10 = cycle(10)
    cert = make_partition_cert(c10, [0] * 5 + [1] * 5, 6)
    tampered = replace(cert, cut_edges=())  # stored set lies; ratio must not change
    rep = verify_partition(GraphSeq([c10]), [tampered], epsilon=1)
    assert rep.ratios == [Fraction(1, 5)]
    assert rep.stored_mismatches == [1]


def test_verify_rejects_oversized_blocks():
    c4 = cycle(4)
    cert = PartitionCert(
        level=1, K=3, assignment=(0, 0, 0, 0), cut_edges=(), cut_ratio=Fraction(0)
    )
    with pytest.raises(GraphError):
        verify_partition(GraphSeq([c4]), [cert], epsilon=1)


def test_make_cert_requires_total_assignment():
    with pytest.raises(GraphError):
        make_partition_cert(cycle(4), [0, 1], 2)
    with pytest.raises(GraphError):
        make_partition_cert(cycle(4), [0, 1, 2, 3], 1)


def test_refine_examples():
    c10 = cycle(10)
    bad = make_partition_cert(c10, [v % 2 for v in range(10)], 6)
    assert len(bad.cut_edges) == 10
    refined = refine_local_search(c10, bad)
    assert len(refined.cut_edges) <= 4
    c6 = cycle(6)
    opt = make_partition_cert(c6, [0, 0, 0, 1, 1, 1], 4)
    assert len(refine_local_search(c6, opt).cut_edges) == 2
    single = make_partition_cert(c6, [0] * 6, 7)
    assert refine_local_search(c6, single).assignment == single.assignment


def test_refine_monotone_and_terminates(rng):
    from conftest import random_connected_graph

    for _ in range(8):
        g = random_connected_graph(9, rng)
        K = int(rng.integers(2, 5))
        assignment = [int(rng.integers(0, g.n)) for _ in range(g.n)]
        sizes = {}
        for i, b in enumerate(assignment):
            sizes[b] = sizes.get(b, 0) + 1
            if sizes[b] >= K:  # keep the random cert legal under the cap
                assignment[i] = g.n + i
                sizes[b] -= 1
        cert = make_partition_cert(g, assignment, K)
        refined = refine_local_search(g, cert)
        assert len(refined.cut_edges) <= len(cert.cut_edges)


def test_brute_force_examples():
    c6 = cycle(6)
    assert len(brute_force_optimal(c6, 4).cut_edges) == 2
    assert len(brute_force_optimal(c6, 7).cut_edges) == 0
    k4 = FiniteGraph.from_edges(4, [(i, j) for i in range(4) for j in range(i + 1, 4)])
    assert len(brute_force_optimal(k4, 2).cut_edges) == 6
    with pytest.raises(GraphError):
        brute_force_optimal(cycle(11), 3)


def test_conversion_examples():
    c10 = cycle(10)
    arcs = make_partition_cert(c10, [0] * 5 + [1] * 5, 6)
    removal = partition_to_removal(c10, arcs)
    assert len(removal.removed) == 4
    assert removal.density == Fraction(2, 5)
    # the conversion budget 2*d*|cut| = 8 leaves room to spare
    assert len(removal.removed) <= 2 * c10.degree_bound * len(arcs.cut_edges)
    ok, largest = verify_removal(c10, removal)
    assert ok and largest <= removal.K
    back = removal_to_partition(c10, removal)
    assert back.K == removal.K + 1
    assert max(block_sizes(back)) <= removal.K


def test_conversion_empty_removal():
    c6 = cycle(6)
    rc = RemovalCert(level=1, K=10, removed=(), density=Fraction(0))
    back = removal_to_partition(c6, rc)
    assert len(set(back.assignment)) == 1


def test_removal_cap_enforced():
    c10 = cycle(10)
    rc = RemovalCert(level=1, K=2, removed=(0,), density=Fraction(1, 10))
    ok, largest = verify_removal(c10, rc)
    assert not ok and largest == 9
    with pytest.raises(GraphError):
        removal_to_partition(c10, rc)


def test_round_trip_components_stay_capped(rng):
    from conftest import random_connected_graph

    for _ in range(8):
        g = random_connected_graph(10, rng)
        K = int(rng.integers(3, 6))
        cert = refine_local_search(g, carve_greedy(g, K))
        removal = partition_to_removal(g, cert)
        assert len(removal.removed) <= 2 * g.degree_bound * len(cert.cut_edges)
        back = removal_to_partition(g, removal)
        assert max(block_sizes(back)) < back.K
        # cut edges of the back-converted partition all touch the removal set
        touched = set(removal.removed)
        for u, v in cut_edges_of(g, back.assignment):
            assert u in touched or v in touched
        assert len(cut_edges_of(g, back.assignment)) <= g.degree_bound * len(
            removal.removed
        )


def test_greedy_cycle_ratio_scaling():
    # arcs of length K-1 keep the ratio near 1/(K-1), well under 3/K
    for K in (5, 10, 20):
        n = 10 * K
        cert = carve_greedy(cycle(n), K)
        assert cert.cut_ratio <= Fraction(3, K)


def test_certificate_files_round_trip(tmp_path):
    seq = GraphSeq([cycle(8), cycle(12)], degree_bound=2)
    certs = [carve_greedy(g, 4, level=i) for i, g in enumerate(seq, start=1)]
    save_partition_certs(certs, tmp_path / "parts.json")
    loaded = load_partition_certs(tmp_path / "parts.json", seq)
    assert [c.assignment for c in loaded] == [c.assignment for c in certs]
    assert [c.cut_ratio for c in loaded] == [c.cut_ratio for c in certs]
    removals = [partition_to_removal(g, c) for g, c in zip(seq, certs)]
    save_removal_certs(removals, tmp_path / "rem.json")
    loaded_r = load_removal_certs(tmp_path / "rem.json", seq)
    assert [r.removed for r in loaded_r] == [r.removed for r in removals]
