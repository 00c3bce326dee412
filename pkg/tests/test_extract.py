import numpy as np
import pytest

from ownet.extract import ExtractionConfig, closure_mask, detect_tncs, extract
from ownet.graph import GraphValidationError, NodeRecord, OwnershipGraph
from ownet.synthetic import SyntheticSpec, block_sizes, generate_synthetic, planted_labels


def test_tnc_detection(tiny):
    assert detect_tncs(tiny) == {"a", "e"}
    assert detect_tncs(tiny, ExtractionConfig(0.25)) == {"a"}


def test_unknown_country_ignored(caplog):
    nodes = [NodeRecord("x", "US"), NodeRecord("y"), NodeRecord("z", "FR")]
    g = OwnershipGraph.from_records(nodes, [("x", "y", 0.5), ("x", "z", 0.05)])
    assert detect_tncs(g) == set()
    assert "without country" in caplog.text


def test_closure_is_down_then_up():
    # r owns a; b owns a; c owns b; r is owned by p. d is unrelated.
    nodes = [NodeRecord(v) for v in ("r", "a", "b", "c", "p", "d")]
    edges = [("r", "a", 0.5), ("b", "a", 0.3), ("c", "b", 0.4), ("p", "r", 0.2), ("d", "c", 0.1)]
    g = OwnershipGraph.from_records(nodes, edges)
    kept = {g.node_ids[i] for i in np.flatnonzero(closure_mask(g, ["r"]))}
    assert kept == {"r", "a", "b", "c", "p", "d"}
    nodes.append(NodeRecord("q"))
    edges.append(("a", "q", 0.1))
    g = OwnershipGraph.from_records(nodes, edges)
    kept = {g.node_ids[i] for i in np.flatnonzero(closure_mask(g, ["b"]))}
    assert kept == {"b", "a", "q", "r", "c", "p", "d"}
    with pytest.raises(GraphValidationError):
        closure_mask(g, [])


def test_extract_marks_roots(tiny):
    sub, roots = extract(tiny)
    assert roots == {"a", "e"}
    assert sub.n_nodes == 5
    assert {v for v, f in zip(sub.node_ids, sub.is_tnc) if f} == roots
    sub, _ = extract(tiny, ExtractionConfig(root_ids=("c",)))
    assert set(sub.node_ids) == {"a", "c", "d", "e"}


def test_synthetic_is_deterministic_and_valid():
    spec = SyntheticSpec(n_nodes=500, n_blocks=7, p_in=0.1, p_out=0.002, seed=11,
                         country_fidelity=0.8, sector_fidelity=0.6,
                         hub_fraction=0.1, hub_p_out=0.01)
    a, b = generate_synthetic(spec), generate_synthetic(spec)
    assert np.array_equal(a.src, b.src) and np.array_equal(a.share, b.share)
    assert (a.in_strength <= 1 + 1e-12).all() and (a.share > 0).all()
    assert (a.src != a.dst).all()
    assert block_sizes(10, 3).tolist() == [4, 3, 3]
    lab = planted_labels(spec)
    inside = (lab[a.src] == lab[a.dst]).mean()
    assert inside > 0.5
    assert SyntheticSpec.from_dict(spec.to_dict()) == spec


def test_synthetic_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(n_nodes=10, n_blocks=2, p_in=0.1, p_out=0.2)
    with pytest.raises(ValueError):
        SyntheticSpec(n_nodes=10, n_blocks=20, p_in=0.5, p_out=0.0)
