import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ownet.graph import DiGraph, GraphValidationError, NodeRecord, OwnershipGraph
from ownet.topology import (bow_tie, degree_stats, density, largest_weak_component,
                            shortest_path_stats, strongly_connected_components,
                            weakly_connected_components)

from conftest import random_digraph


def _nx(g):
    h = nx.DiGraph()
    h.add_nodes_from(g.node_ids)
    h.add_edges_from((s, t) for s, t, _ in g.edges())
    return h


def test_parallel_edges_are_merged(tiny):
    g = OwnershipGraph.from_records(
        [NodeRecord("x"), NodeRecord("y")], [("x", "y", 0.2), ("x", "y", 0.3)])
    assert g.n_edges == 1 and g.merged_edges == 1
    assert g.share[0] == pytest.approx(0.5)


@pytest.mark.parametrize("edges,msg", [
    ([("x", "x", 0.5)], "self-loop"),
    ([("x", "y", 0.0)], "outside"),
    ([("x", "y", 1.5)], "outside"),
    ([("x", "z", 0.5)], "not a known node"),
    ([("x", "y", 0.7), ("z", "y", 0.0)], "outside"),
])
def test_invalid_edges_rejected(edges, msg):
    nodes = [NodeRecord("x"), NodeRecord("y")] + ([NodeRecord("z")] if msg != "not a known node" else [])
    with pytest.raises(GraphValidationError, match=msg):
        OwnershipGraph.from_records(nodes, edges)


def test_incoming_over_one_reject_or_clamp():
    nodes = [NodeRecord(v) for v in "xyz"]
    edges = [("x", "z", 0.7), ("y", "z", 0.6)]
    with pytest.raises(GraphValidationError, match="sum to 1.3"):
        OwnershipGraph.from_records(nodes, edges)
    g = OwnershipGraph.from_records(nodes, edges, on_violation="clamp")
    assert g.in_strength[2] == pytest.approx(1.0)
    assert g.share[0] / g.share[1] == pytest.approx(0.7 / 0.6)


def test_attribute_validation():
    with pytest.raises(GraphValidationError, match="country"):
        OwnershipGraph.from_records([NodeRecord("x", "usa")], [])
    with pytest.raises(GraphValidationError, match="NACE"):
        OwnershipGraph.from_records([NodeRecord("x", "US", 12345)], [])
    with pytest.raises(GraphValidationError, match="unique"):
        DiGraph(["a", "a"], [], [])


def test_neighbours_and_subgraph(tiny):
    assert tiny.out_neighbors("a") == ["b", "c"]
    assert sorted(tiny.in_neighbors("d")) == ["c", "e"]
    sub = tiny.subgraph(["a", "c", "d"])
    assert sub.n_edges == 2
    assert sub.node_record("c") == tiny.node_record("c")
    assert tiny.reversed().out_neighbors("d") == ["c", "e"]


def test_components_against_networkx():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n = int(rng.integers(2, 40))
        s, t = random_digraph(rng, n, 1.5 / n)
        g = DiGraph([f"v{i}" for i in range(n)], s, t)
        h = _nx(g)
        assert sorted(map(sorted, weakly_connected_components(g))) == \
            sorted(map(sorted, nx.weakly_connected_components(h)))
        assert sorted(map(sorted, strongly_connected_components(g))) == \
            sorted(map(sorted, nx.strongly_connected_components(h)))
        lcc = largest_weak_component(g)
        assert lcc.sum() == max(len(c) for c in nx.weakly_connected_components(h))


def _bow_tie_oracle(h):
    sccs = sorted(nx.strongly_connected_components(h), key=lambda c: (-len(c), min(c)))
    if len(sccs[0]) < 2:
        return {v: "OTHER" for v in h}
    core = sccs[0]
    v0 = next(iter(core))
    out = nx.descendants(h, v0) - core
    inn = nx.ancestors(h, v0) - core
    return {v: "LSCC" if v in core else "OUT" if v in out else "IN" if v in inn else "OTHER"
            for v in h}


def test_bow_tie_against_reachability_oracle():
    rng = np.random.default_rng(1)
    for _ in range(30):
        n = int(rng.integers(3, 30))
        s, t = random_digraph(rng, n, 2.0 / n)
        g = DiGraph([f"v{i:02d}" for i in range(n)], s, t)
        bt = bow_tie(g)
        want = _bow_tie_oracle(_nx(g))
        assert {v: bt.label_of(v) for v in g.node_ids} == want


def test_bow_tie_classes():
    g = DiGraph(list("abcde"), [0, 1, 2, 3, 1], [1, 2, 1, 1, 4])
    bt = bow_tie(g)
    assert bt.members("LSCC") == {"b", "c"}
    assert bt.members("IN") == {"a", "d"}
    assert bt.members("OUT") == {"e"}
    assert bow_tie(DiGraph(list("ab"), [0], [1])).counts["OTHER"] == 2


def test_shortest_paths_against_networkx():
    rng = np.random.default_rng(2)
    s, t = random_digraph(rng, 60, 0.05)
    g = DiGraph([str(i) for i in range(60)], s, t)
    stats = shortest_path_stats(g, sample_size=1000)
    d = [l for _, row in nx.all_pairs_shortest_path_length(_nx(g)) for l in row.values() if l > 0]
    assert stats["n_pairs"] == len(d)
    assert stats["max"] == max(d)
    assert stats["mean"] == pytest.approx(np.mean(d), rel=1e-12)
    assert stats["std"] == pytest.approx(np.std(d), rel=1e-9)
    assert shortest_path_stats(DiGraph(list("ab"), [], []))["no_pairs"]


def test_density_and_degrees(tiny):
    assert density(5420, 7876) == pytest.approx(7876 / (5420 * 5419))
    with pytest.raises(GraphValidationError):
        density(1, 0)
    d = degree_stats(tiny)
    assert d["mean_in"] == d["mean_out"] == pytest.approx(4 / 5)
    assert d["max_out"] == 2


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 7), st.integers(0, 7),
                          st.floats(0.01, 0.3)), max_size=25))
def test_valid_graphs_keep_share_rule(triples):
    triples = [(f"n{s}", f"n{t}", a) for s, t, a in triples if s != t]
    nodes = [NodeRecord(f"n{i}") for i in range(8)]
    g = OwnershipGraph.from_records(nodes, triples, on_violation="clamp")
    assert (g.in_strength <= 1 + 1e-9).all()
    assert len(set(zip(g.src.tolist(), g.dst.tolist()))) == g.n_edges
