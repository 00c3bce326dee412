import numpy as np
import pytest

from ownet.comnet import (aggregate, centrality_report, community_table, cross_link_share,
                          debtrank, impact_matrix, radial_layout, ranked_communities,
                          remove_sector, value_vector)
from ownet.graph import NodeRecord, OwnershipGraph
from ownet.synthetic import SyntheticSpec, generate_synthetic, planted_labels


def debtrank_oracle(W, v, seed, psi=1.0):
    """Node-by-node DebtRank with explicit D/U/I states."""
    n = len(v)
    W = np.minimum(W, 1.0)
    h = [0.0] * n
    state = ["U"] * n
    h[seed], state[seed] = psi, "D"
    while "D" in state:
        new = list(h)
        for j in range(n):
            if state[j] != "I":
                new[j] = min(1.0, h[j] + sum(W[i][j] * h[i] for i in range(n) if state[i] == "D"))
        nxt = []
        for j in range(n):
            if state[j] == "D":
                nxt.append("I")
            elif state[j] == "U" and new[j] > 0:
                nxt.append("D")
            else:
                nxt.append(state[j])
        h, state = new, nxt
    return sum(hj * vj for hj, vj in zip(h, v)) - psi * v[seed]


def test_two_node_example():
    res = debtrank([[0, 0.5], [0, 0]], [0.5, 0.5], [0])
    assert res.R == 0.25
    assert res.iterations <= 2
    assert debtrank([[0, 0], [1, 0]], [0.5, 0.5], [0]).R == 0.0


def test_debtrank_against_oracle():
    rng = np.random.default_rng(4)
    for _ in range(60):
        n = int(rng.integers(2, 9))
        W = rng.random((n, n)) * (rng.random((n, n)) < 0.4) * 1.5
        np.fill_diagonal(W, 0)
        v = rng.random(n)
        v /= v.sum()
        seed = int(rng.integers(n))
        res = debtrank(W, v, [seed])
        assert res.R == pytest.approx(debtrank_oracle(W, v, seed), abs=1e-12)


def test_debtrank_cap_and_validation():
    W = np.array([[0, 3.0], [0, 0]])
    assert debtrank(W, [0.5, 0.5], [0]).R == 0.5
    with pytest.raises(ValueError):
        debtrank(W, [0.4, 0.4], [0])
    with pytest.raises(ValueError):
        debtrank(W, [0.5, 0.5], [])


def test_debtrank_history_monotone():
    rng = np.random.default_rng(1)
    W = rng.random((20, 20)) * 0.3
    res = debtrank(W, np.full(20, 0.05), [0], record_history=True)
    hist = np.array(res.history)
    assert (np.diff(hist, axis=0) >= 0).all()
    assert res.iterations <= 20


def test_aggregate_matches_scan(planted_small):
    spec, g = planted_small
    lab = planted_labels(spec)
    lab[:3] = 9  # a small extra community
    cn = aggregate(g, lab, top_k=3)
    ranked = ranked_communities(lab, 3)
    assert cn.community_ids.tolist() == ranked.tolist()
    dense = cn.dense()
    for i, a in enumerate(ranked):
        for j, b in enumerate(ranked):
            want = sum(1 for s, t in zip(g.src, g.dst) if lab[s] == a and lab[t] == b)
            assert dense[i, j] == want
    assert cn.sizes.tolist() == [int((lab == c).sum()) for c in ranked]
    dg = cn.digraph()
    assert dg.n_edges == np.count_nonzero(dense - np.diag(np.diag(dense)))


def test_impact_matrix_values():
    from ownet.comnet import CommunityNetwork
    import scipy.sparse as sp
    counts = sp.csr_matrix(np.array([[10, 4, 0], [2, 8, 0], [1, 1, 0]]))
    cn = CommunityNetwork(np.arange(3), counts, np.array([5, 5, 2]))
    im = impact_matrix(cn, beta=2.0)
    assert im.W[1, 0] == pytest.approx(2.0 * 4 / 10)
    assert im.W[0, 1] == pytest.approx(2.0 * 2 / 8)
    assert im.degenerate.tolist() == [False, False, True]
    assert (im.W[:, 2] == 0).all() and (np.diag(im.W) == 0).all()
    assert impact_matrix(cn).beta == 3.0


def test_remove_sector_and_cross_share():
    nodes = [NodeRecord("a", nace=6512), NodeRecord("b", nace=100), NodeRecord("c", nace=2000),
             NodeRecord("d", nace=6600)]
    edges = [("a", "b", 0.5), ("b", "c", 0.5), ("d", "c", 0.2), ("c", "b", 0.1)]
    g = OwnershipGraph.from_records(nodes, edges)
    f = remove_sector(g, "financial")
    assert f.node_ids == ("b", "c") and f.n_edges == 2
    # cross edges b->c and c->b, neither touches a financial firm
    assert cross_link_share(g, np.array([0, 0, 1, 1]), "financial") == 0.0
    # cross edges a->b, b->c, c->b; only a->b touches one
    assert cross_link_share(g, np.array([0, 1, 2, 2]), "financial") == pytest.approx(1 / 3)
    assert cross_link_share(g, np.zeros(4, int), "financial") == 0.0


def test_tables_and_layout():
    spec = SyntheticSpec(n_nodes=300, n_blocks=5, p_in=0.1, p_out=0.005, seed=2,
                         hub_fraction=0.1, hub_p_out=0.02)
    g = generate_synthetic(spec)
    lab = planted_labels(spec)
    rows = community_table(g, lab, top_k=3, sector_filter="financial")
    for r in rows:
        n, rel = r["n_firms"], r["n_rel"]
        assert r["density"] == pytest.approx(rel / (n * (n - 1)))
        assert r["filtered_n_firms"] < n
    rep = centrality_report(g, lab, top_k=5, sector_filter="financial")
    assert rep["beta"] == 5.0 and len(rep["full"]) == len(rep["filtered"]) == 5
    mean = lambda rs: np.mean([r["R"] for r in rs])
    assert mean(rep["filtered"]) < mean(rep["full"])
    lay = radial_layout(rep["full"])
    assert min(p["radius"] for p in lay) == 0.0
    assert lay[0]["angle"] == 0.0
    assert value_vector([1, 3]).tolist() == [0.25, 0.75]
    assert value_vector([1, 3], "uniform").tolist() == [0.5, 0.5]
