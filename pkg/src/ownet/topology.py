"""Connectivity and descriptive statistics for directed graphs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csgraph

from .graph import DiGraph, GraphValidationError

LSCC, IN, OUT, OTHER = "LSCC", "IN", "OUT", "OTHER"
BOWTIE_CLASSES = (LSCC, IN, OUT, OTHER)


def _group(labels: np.ndarray, g: DiGraph) -> list[np.ndarray]:
    """Index arrays per label, largest first, ties by smallest member id."""
    if len(labels) == 0:
        return []
    order = np.argsort(labels, kind="stable")
    bounds = np.flatnonzero(np.diff(labels[order])) + 1
    groups = np.split(order, bounds)
    ids = g.node_ids
    return sorted(groups, key=lambda m: (-len(m), min(ids[i] for i in m)))


def component_labels(g: DiGraph, connection: str = "weak") -> np.ndarray:
    if g.n_nodes == 0:
        return np.zeros(0, dtype=np.int64)
    _, labels = csgraph.connected_components(g.out_csr, directed=True, connection=connection)
    return labels


def weakly_connected_components(g: DiGraph) -> list[set[str]]:
    """Weak components as sets of node ids, largest first."""
    ids = g.node_ids
    return [{ids[i] for i in m} for m in _group(component_labels(g, "weak"), g)]


def strongly_connected_components(g: DiGraph) -> list[set[str]]:
    """Strong components as sets of node ids, largest first."""
    ids = g.node_ids
    return [{ids[i] for i in m} for m in _group(component_labels(g, "strong"), g)]


def largest_weak_component(g: DiGraph) -> np.ndarray:
    """Bool mask of the largest weakly connected component."""
    mask = np.zeros(g.n_nodes, dtype=bool)
    groups = _group(component_labels(g, "weak"), g)
    if groups:
        mask[groups[0]] = True
    return mask


def reachable(csr, sources: np.ndarray) -> np.ndarray:
    """Bool mask of nodes reachable from ``sources`` (included) along CSR rows."""
    n = csr.shape[0]
    seen = np.zeros(n, dtype=bool)
    frontier = np.unique(np.asarray(sources, dtype=np.int64))
    seen[frontier] = True
    indptr, indices = csr.indptr, csr.indices
    while len(frontier):
        starts = indptr[frontier]
        counts = indptr[frontier + 1] - starts
        total = int(counts.sum())
        if total == 0:
            break
        # flat positions of every out-edge of the frontier
        offsets = np.repeat(starts - np.cumsum(counts) + counts, counts) + np.arange(total)
        nbrs = np.unique(indices[offsets])
        frontier = nbrs[~seen[nbrs]]
        seen[frontier] = True
    return seen


@dataclass
class BowTie:
    node_ids: tuple[str, ...]
    labels: np.ndarray  # one of BOWTIE_CLASSES per node
    counts: dict[str, int] = field(default_factory=dict)

    def members(self, cls: str) -> set[str]:
        return {self.node_ids[i] for i in np.flatnonzero(self.labels == cls)}

    def label_of(self, node: str) -> str:
        return str(self.labels[self.node_ids.index(node)])


def bow_tie(g: DiGraph) -> BowTie:
    """Bow-tie decomposition around the largest strongly connected component.

    Among equally large SCCs the one holding the smallest node id wins. A
    graph whose SCCs are all singletons has no core: every node is OTHER.
    """
    n = g.n_nodes
    labels = np.full(n, OTHER, dtype="<U5")
    groups = _group(component_labels(g, "strong"), g)
    if groups and len(groups[0]) >= 2:
        core = groups[0]
        fwd = reachable(g.out_csr, core)
        bwd = reachable(g.in_csr, core)
        labels[bwd] = IN
        labels[fwd] = OUT
        labels[core] = LSCC
    counts = {c: int((labels == c).sum()) for c in BOWTIE_CLASSES}
    return BowTie(g.node_ids, labels, counts)


def degree_stats(g: DiGraph) -> dict[str, float]:
    """Mean, population std and max of in- and out-degree."""
    if g.n_nodes == 0:
        return dict.fromkeys(
            ("mean_in", "std_in", "max_in", "mean_out", "std_out", "max_out"), 0.0
        )
    kin, kout = g.in_degree, g.out_degree
    return {
        "mean_in": float(kin.mean()), "std_in": float(kin.std()), "max_in": int(kin.max()),
        "mean_out": float(kout.mean()), "std_out": float(kout.std()), "max_out": int(kout.max()),
    }


def shortest_path_stats(g: DiGraph, sample_size: int = 1000, seed: int = 0,
                        chunk: int = 64) -> dict:
    """Directed hop-count statistics over reachable ordered pairs.

    BFS runs from ``sample_size`` sources drawn without replacement (every
    node when the graph is smaller). Self-pairs and unreachable pairs are
    ignored; ``no_pairs`` is set when nothing is reachable.
    """
    if sample_size < 1:
        raise ValueError("sample_size must be >= 1")
    n = g.n_nodes
    if n <= sample_size:
        sources = np.arange(n)
    else:
        sources = np.sort(np.random.default_rng(seed).choice(n, size=sample_size, replace=False))
    total = total_sq = 0.0
    count = 0
    longest = 0
    csr = g.out_csr
    for lo in range(0, len(sources), chunk):
        d = csgraph.shortest_path(csr, method="D", directed=True, unweighted=True,
                                  indices=sources[lo:lo + chunk])
        d = d[np.isfinite(d) & (d > 0)]
        if d.size:
            total += d.sum()
            total_sq += (d * d).sum()
            count += d.size
            longest = max(longest, int(d.max()))
    if count == 0:
        return {"max": 0, "mean": 0.0, "std": 0.0, "n_pairs": 0, "n_sources": len(sources),
                "no_pairs": True}
    mean = total / count
    var = max(total_sq / count - mean * mean, 0.0)
    return {"max": longest, "mean": float(mean), "std": float(np.sqrt(var)),
            "n_pairs": count, "n_sources": len(sources), "no_pairs": False}


def density(n_nodes: int, n_edges: int) -> float:
    """Directed link density E / (N (N - 1))."""
    if n_nodes < 2:
        raise GraphValidationError("link density needs at least two nodes")
    return n_edges / (n_nodes * (n_nodes - 1))


def link_density(g: DiGraph) -> float:
    return density(g.n_nodes, g.n_edges)
