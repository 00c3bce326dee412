import numpy as np
import pytest

from ownet.graph import NodeRecord, OwnershipGraph
from ownet.synthetic import SyntheticSpec, generate_synthetic


@pytest.fixture
def tiny():
    """Five firms in two countries with a cross-border holding above 10%."""
    nodes = [NodeRecord("a", "US", 6420), NodeRecord("b", "US", 2410),
             NodeRecord("c", "DE", 2410), NodeRecord("d", "DE", 4711),
             NodeRecord("e", "FR", 100)]
    edges = [("a", "b", 0.6), ("a", "c", 0.3), ("c", "d", 0.5), ("e", "d", 0.2)]
    return OwnershipGraph.from_records(nodes, edges)


@pytest.fixture(scope="session")
def planted_small():
    spec = SyntheticSpec(n_nodes=80, n_blocks=4, p_in=0.5, p_out=0.02, seed=3)
    return spec, generate_synthetic(spec)


def random_digraph(rng, n, p):
    a = rng.random((n, n)) < p
    np.fill_diagonal(a, False)
    return np.nonzero(a)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
