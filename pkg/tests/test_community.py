import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ownet.community import (ModularityView, louvain, local_moving, modularity,
                             normalized_mutual_info, subcommunities)
from ownet.graph import OwnetError
from ownet.synthetic import planted_labels

from conftest import random_digraph


def q_oracle(n, pairs, labels):
    """Modularity straight from the double sum over node pairs."""
    a = np.zeros((n, n))
    for s, t in pairs:
        if s != t:
            a[s, t] = a[t, s] = 1
    k = a.sum(1)
    m2 = a.sum()
    return sum((a[i, j] - k[i] * k[j] / m2) * (labels[i] == labels[j])
               for i in range(n) for j in range(n)) / m2


def set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for p in set_partitions(rest):
        for i in range(len(p)):
            yield p[:i] + [[first] + p[i]] + p[i + 1:]
        yield [[first]] + p


def test_two_triangles():
    v = ModularityView.from_edges(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)])
    assert modularity(v, [0, 0, 0, 1, 1, 1]) == 0.5
    assert modularity(v, [0] * 6) == 0.0


def test_view_merges_direction_and_duplicates():
    v = ModularityView.from_edges(3, [(0, 1), (1, 0), (1, 2), (2, 2)])
    assert v.n_links == 2
    assert v.degrees.tolist() == [1, 2, 1]


def test_modularity_matches_oracle_and_networkx():
    rng = np.random.default_rng(5)
    for _ in range(25):
        n = int(rng.integers(3, 15))
        s, t = random_digraph(rng, n, 0.3)
        if len(s) == 0:
            continue
        pairs = list(zip(s.tolist(), t.tolist()))
        lab = rng.integers(0, 3, size=n)
        v = ModularityView.from_edges(n, pairs)
        q = modularity(v, lab)
        assert q == pytest.approx(q_oracle(n, pairs, lab), abs=1e-12)
        h = nx.Graph(pairs)
        h.add_nodes_from(range(n))
        comms = [set(np.flatnonzero(lab == c).tolist()) for c in np.unique(lab)]
        assert q == pytest.approx(nx.community.modularity(h, comms), abs=1e-12)


def test_partition_as_mapping():
    v = ModularityView.from_edges(4, [(0, 1), (2, 3)], node_ids=list("abcd"))
    assert modularity(v, {"a": "x", "b": "x", "c": "y", "d": "y"}) == 0.5
    with pytest.raises(OwnetError):
        modularity(v, {"a": 1})
    with pytest.raises(OwnetError):
        modularity(ModularityView.from_edges(2, []), [0, 1])


def test_local_moving_gain_matches_recomputed_q():
    rng = np.random.default_rng(9)
    for trial in range(20):
        n = int(rng.integers(5, 30))
        s, t = random_digraph(rng, n, 0.2)
        if len(s) == 0:
            continue
        v = ModularityView.from_edges(n, list(zip(s.tolist(), t.tolist())))
        start = np.arange(n)
        q0 = modularity(v, start)
        for moves in (1, 3, -1):
            comm, dq, done = local_moving(v.adjacency, start, seed=trial, max_moves=moves)
            assert done <= moves or moves < 0
            assert modularity(v, comm) - q0 == pytest.approx(dq, abs=1e-12)


def test_louvain_bounded_by_exhaustive_optimum():
    rng = np.random.default_rng(12)
    for _ in range(8):
        n = int(rng.integers(4, 8))
        s, t = random_digraph(rng, n, 0.35)
        if len(s) == 0:
            continue
        v = ModularityView.from_edges(n, list(zip(s.tolist(), t.tolist())))
        best = -1.0
        for p in set_partitions(list(range(n))):
            lab = np.empty(n, dtype=int)
            for c, block in enumerate(p):
                lab[block] = c
            best = max(best, modularity(v, lab))
        q = louvain(v, seed=0).stage_log[-1].modularity
        assert q <= best + 1e-12
        assert q >= 0.8 * best


def test_louvain_hierarchy_and_determinism(planted_small):
    spec, g = planted_small
    v = ModularityView.from_graph(g)
    a, b = louvain(v, seed=4), louvain(v, seed=4)
    assert all(np.array_equal(x, y) for x, y in zip(a.levels, b.levels))
    assert a.levels[0].tolist() == list(range(g.n_nodes))
    log = a.stage_log
    assert [r.level for r in log] == list(range(len(log)))
    assert all(y.modularity > x.modularity for x, y in zip(log, log[1:]))
    assert log[-1].modularity == pytest.approx(modularity(v, a.final), abs=1e-12)
    for lo, hi in zip(a.levels[1:], a.levels[2:]):
        # every level refines the next
        assert all(len(np.unique(hi[lo == c])) == 1 for c in np.unique(lo))
    first = [int(np.flatnonzero(a.final == c)[0]) for c in range(a.final.max() + 1)]
    assert first == sorted(first)
    assert normalized_mutual_info(a.final, planted_labels(spec)) > 0.95


def test_louvain_without_links_fails():
    with pytest.raises(OwnetError):
        louvain(ModularityView.from_edges(3, []))


def test_subcommunities(planted_small):
    _, g = planted_small
    hp = louvain(ModularityView.from_graph(g), seed=1)
    sc = subcommunities(hp, 0)
    sizes = [s for _, s in sc["members"]]
    assert sum(sizes) == sc["size"] == int((hp.final == 0).sum())
    assert sizes == sorted(sizes, reverse=True)
    assert sc["herfindahl_of_sizes"] == pytest.approx(sum((s / sc["size"]) ** 2 for s in sizes))
    with pytest.raises(OwnetError):
        subcommunities(hp, 999)


def _nmi_oracle(a, b):
    n = len(a)
    ca, cb = set(a), set(b)
    pa = {x: a.count(x) / n for x in ca}
    pb = {y: b.count(y) / n for y in cb}
    mi = 0.0
    for x, y in itertools.product(ca, cb):
        pxy = sum(1 for i in range(n) if a[i] == x and b[i] == y) / n
        if pxy:
            mi += pxy * np.log(pxy / (pa[x] * pb[y]))
    ha = -sum(p * np.log(p) for p in pa.values())
    hb = -sum(p * np.log(p) for p in pb.values())
    return 1.0 if ha == hb == 0 else mi / ((ha + hb) / 2)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 4)), min_size=1, max_size=30))
def test_nmi_matches_oracle(pairs):
    a = [x for x, _ in pairs]
    b = [y for _, y in pairs]
    assert normalized_mutual_info(a, b) == pytest.approx(_nmi_oracle(a, b), abs=1e-12)
    assert normalized_mutual_info(a, a) == pytest.approx(1.0)
