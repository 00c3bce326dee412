"""Multi-level modularity optimisation on the unweighted undirected view of a graph."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from . import _kernels
from .graph import DiGraph, OwnetError
from .characterize import herfindahl

GAIN_TOL = 1e-10
SWEEP_TOL = 1e-6


@dataclass(frozen=True)
class ModularityView:
    """Symmetric 0/1 adjacency without self-loops, derived from a digraph.

    Direction and weights are dropped and reciprocal or parallel edges merge
    into a single undirected link.
    """

    node_ids: tuple[str, ...]
    adjacency: sp.csr_matrix

    @classmethod
    def from_graph(cls, g: DiGraph) -> "ModularityView":
        n = g.n_nodes
        keep = g.src != g.dst
        a = sp.coo_matrix((np.ones(int(keep.sum())), (g.src[keep], g.dst[keep])), shape=(n, n))
        a = (a + a.T).tocsr()
        a.data[:] = 1.0
        a.sort_indices()
        return cls(g.node_ids, a)

    @classmethod
    def from_edges(cls, n: int, pairs, node_ids=None) -> "ModularityView":
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        ids = node_ids if node_ids is not None else [str(i) for i in range(n)]
        return cls.from_graph(DiGraph(ids, pairs[:, 0], pairs[:, 1]))

    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.adjacency.indptr).astype(np.float64)

    @property
    def n_links(self) -> int:
        return self.adjacency.nnz // 2

    def labels(self, partition) -> np.ndarray:
        """Coerce a partition (label array or id -> label mapping) to an index array."""
        if isinstance(partition, Mapping):
            try:
                raw = [partition[v] for v in self.node_ids]
            except KeyError as exc:
                raise OwnetError(f"partition does not cover node {exc.args[0]!r}") from None
        else:
            raw = list(partition) if not isinstance(partition, np.ndarray) else partition
            if len(raw) != self.n_nodes:
                raise OwnetError("partition length does not match node count")
        _, lab = np.unique(np.asarray(raw), return_inverse=True)
        return lab.astype(np.int64)


def _modularity_weighted(adj: sp.csr_matrix, labels: np.ndarray, m2: float) -> float:
    # Q = (1/2l) * sum_c [ internal_c - K_c^2 / 2l ], internal counted both ways
    coo = adj.tocoo()
    same = labels[coo.row] == labels[coo.col]
    internal = coo.data[same].sum()
    k = np.asarray(adj.sum(axis=1)).ravel()
    ktot = np.bincount(labels, weights=k)
    return float((internal - (ktot ** 2).sum() / m2) / m2)


def modularity(view: ModularityView, partition) -> float:
    """Newman modularity of ``partition`` on the undirected view."""
    m2 = float(view.adjacency.nnz)
    if m2 == 0:
        raise OwnetError("modularity is undefined on a graph without links")
    return _modularity_weighted(view.adjacency, view.labels(partition), m2)


@dataclass
class StageRecord:
    level: int
    n_communities: int
    n_links: int
    modularity: float


@dataclass
class HierarchicalPartition:
    """Community labels of every original node at each level.

    ``levels[0]`` is the all-singletons partition; each later level merges
    communities of the previous one. Labels at every level run 0..C-1,
    ordered by the smallest node index in the community.
    """

    node_ids: tuple[str, ...]
    levels: list[np.ndarray]
    stage_log: list[StageRecord] = field(default_factory=list)

    @property
    def final(self) -> np.ndarray:
        return self.levels[-1]

    @property
    def n_levels(self) -> int:
        return len(self.levels)

    def level_map(self, level: int) -> dict[str, int]:
        return dict(zip(self.node_ids, self.levels[level].tolist()))

    def community_sizes(self, level: int = -1) -> np.ndarray:
        return np.bincount(self.levels[level])


def _canonical(labels: np.ndarray) -> np.ndarray:
    """Relabel 0..C-1 by the smallest member index."""
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inv]


def _aggregate(adj: sp.csr_matrix, labels: np.ndarray) -> sp.csr_matrix:
    n, c = adj.shape[0], int(labels.max()) + 1
    p = sp.csr_matrix((np.ones(n), (np.arange(n), labels)), shape=(n, c))
    b = (p.T @ adj @ p).tocsr()
    b.sort_indices()
    return b


def _links_between(adj: sp.csr_matrix) -> int:
    coo = adj.tocoo()
    return int((coo.row < coo.col).sum())


def local_moving(adj: sp.csr_matrix, labels: np.ndarray, seed: int,
                 max_moves: int = -1, sweep_tol: float = SWEEP_TOL) -> tuple[np.ndarray, float, int]:
    """One local-moving phase. Returns ``(labels, delta_q, n_moves)``."""
    k = np.asarray(adj.sum(axis=1)).ravel()
    m2 = float(k.sum())
    comm = np.array(labels, dtype=np.int64)
    dq, moves = _kernels.local_moving(
        adj.indptr.astype(np.int64), adj.indices.astype(np.int64), adj.data.astype(np.float64),
        k, m2, comm, int(seed) & 0xFFFFFFFF, GAIN_TOL, float(sweep_tol), int(max_moves),
    )
    return comm, dq, moves


def louvain(view: ModularityView, seed: int = 0, max_levels: int = 100) -> HierarchicalPartition:
    """Multi-level modularity optimisation (the Louvain method).

    Each stage moves nodes greedily between neighbouring communities in a
    seeded random order, then collapses communities into the nodes of the
    next stage. Stops when a stage does not raise modularity by more than
    ``GAIN_TOL``.
    """
    m2 = float(view.adjacency.nnz)
    if m2 == 0:
        raise OwnetError("louvain needs at least one link")
    n = view.n_nodes
    adj = view.adjacency
    node_labels = np.arange(n, dtype=np.int64)
    q = _modularity_weighted(adj, node_labels, m2)
    hp = HierarchicalPartition(view.node_ids, [node_labels.copy()],
                               [StageRecord(0, n, view.n_links, q)])
    rng = np.random.default_rng(seed)
    for _ in range(max_levels):
        stage_seed = int(rng.integers(2**31))
        comm, _, moves = local_moving(adj, np.arange(adj.shape[0]), stage_seed)
        if moves == 0:
            break
        comm = _canonical(comm)
        new_adj = _aggregate(adj, comm)
        new_q = _modularity_weighted(new_adj, np.arange(new_adj.shape[0]), m2)
        if new_q - q <= GAIN_TOL:
            break
        node_labels = comm[node_labels]
        adj, q = new_adj, new_q
        hp.levels.append(node_labels.copy())
        hp.stage_log.append(StageRecord(len(hp.levels) - 1, adj.shape[0], _links_between(adj), q))
    return hp


def subcommunities(hp: HierarchicalPartition, community: int) -> dict:
    """Level-1 constituents of a final-level community and the Herfindahl of their sizes."""
    final = hp.final
    members = final == community
    if community < 0 or not members.any():
        raise OwnetError(f"unknown community {community}")
    sub_level = hp.levels[min(1, hp.n_levels - 1)]
    ids, sizes = np.unique(sub_level[members], return_counts=True)
    order = np.lexsort((ids, -sizes))
    return {
        "community": int(community),
        "size": int(members.sum()),
        "members": [(int(i), int(s)) for i, s in zip(ids[order], sizes[order])],
        "herfindahl_of_sizes": herfindahl(sizes),
    }


def normalized_mutual_info(a, b) -> float:
    """NMI with arithmetic-mean normalisation; 1.0 when both labelings are trivial."""
    _, a = np.unique(np.asarray(a), return_inverse=True)
    _, b = np.unique(np.asarray(b), return_inverse=True)
    n = len(a)
    if n == 0 or len(b) != n:
        raise ValueError("labelings must be non-empty and equally long")
    cont = sp.coo_matrix((np.ones(n), (a, b))).tocsr()
    cont.sum_duplicates()
    pa = np.bincount(a) / n
    pb = np.bincount(b) / n
    coo = cont.tocoo()
    pab = coo.data / n
    mi = float((pab * np.log(pab / (pa[coo.row] * pb[coo.col]))).sum())
    ha = float(-(pa * np.log(pa)).sum())
    hb = float(-(pb * np.log(pb)).sum())
    if ha == 0 and hb == 0:
        return 1.0
    denom = (ha + hb) / 2
    return max(mi, 0.0) / denom if denom > 0 else 0.0
