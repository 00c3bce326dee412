"""Directed weighted graphs with firm attributes.

Two containers live here. :class:`DiGraph` is a plain directed graph with
string node ids and float edge weights, used for derived networks such as the
community network. :class:`OwnershipGraph` adds the per-firm attributes and the
ownership-share validation rules applied on ingest.

Both are immutable after construction. Edges are kept as parallel numpy arrays
together with lazily built CSR indexes for out- and in-neighbours.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

SHARE_EPS = 1e-9
UNKNOWN_COUNTRY = "??"
UNKNOWN_NACE = -1

_COUNTRY_RE = re.compile(r"^([A-Z]{2}|\?\?)$")


class OwnetError(Exception):
    """Base class for errors raised by this package."""


class GraphValidationError(OwnetError, ValueError):
    pass


@dataclass(frozen=True)
class NodeRecord:
    id: str
    country: str = UNKNOWN_COUNTRY
    nace: int = UNKNOWN_NACE
    is_tnc: bool = False
    operating_revenue: float | None = None


class DiGraph:
    """Immutable directed graph over string node ids.

    Parameters
    ----------
    node_ids : sequence of str
        Unique node identifiers. Their order defines the internal index.
    src, dst : array-like of int
        Edge endpoints as indices into ``node_ids``.
    weight : array-like of float, optional
        Edge weights, default 1.
    """

    def __init__(self, node_ids: Sequence[str], src, dst, weight=None):
        ids = [str(x) for x in node_ids]
        self.node_ids: tuple[str, ...] = tuple(ids)
        n = len(ids)
        if len(set(ids)) != n:
            raise GraphValidationError("node ids must be unique")
        self.src = np.ascontiguousarray(src, dtype=np.int64)
        self.dst = np.ascontiguousarray(dst, dtype=np.int64)
        if self.src.shape != self.dst.shape:
            raise GraphValidationError("src and dst differ in length")
        if weight is None:
            weight = np.ones(len(self.src))
        self.weight = np.ascontiguousarray(weight, dtype=np.float64)
        if self.weight.shape != self.src.shape:
            raise GraphValidationError("weight length does not match edges")
        if len(self.src) and (
            min(self.src.min(), self.dst.min()) < 0 or max(self.src.max(), self.dst.max()) >= n
        ):
            raise GraphValidationError("edge endpoint outside node range")
        for arr in (self.src, self.dst, self.weight):
            arr.setflags(write=False)

    # basic sizes -------------------------------------------------------
    @property
    def n_nodes(self) -> int:
        return len(self.node_ids)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(n_nodes={self.n_nodes}, n_edges={self.n_edges})"

    @cached_property
    def index(self) -> dict[str, int]:
        return {v: i for i, v in enumerate(self.node_ids)}

    # adjacency ---------------------------------------------------------
    @cached_property
    def out_csr(self) -> sp.csr_matrix:
        """Row = source, column = target, data = edge weight."""
        n = self.n_nodes
        m = sp.csr_matrix((self.weight, (self.src, self.dst)), shape=(n, n))
        m.sort_indices()
        return m

    @cached_property
    def in_csr(self) -> sp.csr_matrix:
        """Row = target, column = source."""
        m = self.out_csr.T.tocsr()
        m.sort_indices()
        return m

    @cached_property
    def in_degree(self) -> np.ndarray:
        return np.bincount(self.dst, minlength=self.n_nodes)

    @cached_property
    def out_degree(self) -> np.ndarray:
        return np.bincount(self.src, minlength=self.n_nodes)

    @cached_property
    def in_strength(self) -> np.ndarray:
        return np.bincount(self.dst, weights=self.weight, minlength=self.n_nodes)

    @cached_property
    def out_strength(self) -> np.ndarray:
        return np.bincount(self.src, weights=self.weight, minlength=self.n_nodes)

    def out_neighbors(self, node: str) -> list[str]:
        m = self.out_csr
        i = self.index[node]
        return [self.node_ids[j] for j in m.indices[m.indptr[i] : m.indptr[i + 1]]]

    def in_neighbors(self, node: str) -> list[str]:
        m = self.in_csr
        i = self.index[node]
        return [self.node_ids[j] for j in m.indices[m.indptr[i] : m.indptr[i + 1]]]

    def edges(self) -> Iterable[tuple[str, str, float]]:
        ids = self.node_ids
        for s, t, w in zip(self.src.tolist(), self.dst.tolist(), self.weight.tolist()):
            yield ids[s], ids[t], w

    def indices_of(self, nodes: Iterable[str]) -> np.ndarray:
        idx = self.index
        try:
            return np.array([idx[v] for v in nodes], dtype=np.int64)
        except KeyError as exc:
            raise GraphValidationError(f"unknown node id {exc.args[0]!r}") from None

    # derived graphs ----------------------------------------------------
    def _edge_subset(self, keep_nodes: np.ndarray):
        """Remap edges onto the nodes flagged in ``keep_nodes`` (bool mask)."""
        new_index = np.full(self.n_nodes, -1, dtype=np.int64)
        kept = np.flatnonzero(keep_nodes)
        new_index[kept] = np.arange(len(kept))
        emask = keep_nodes[self.src] & keep_nodes[self.dst]
        return kept, new_index[self.src[emask]], new_index[self.dst[emask]], emask

    def subgraph(self, nodes) -> "DiGraph":
        """Induced subgraph. ``nodes`` is a bool mask, index array or id iterable."""
        mask = self._as_mask(nodes)
        kept, s, t, emask = self._edge_subset(mask)
        return DiGraph([self.node_ids[i] for i in kept], s, t, self.weight[emask])

    def reversed(self) -> "DiGraph":
        return DiGraph(self.node_ids, self.dst, self.src, self.weight)

    def _as_mask(self, nodes) -> np.ndarray:
        if isinstance(nodes, np.ndarray) and nodes.dtype == bool:
            if nodes.shape != (self.n_nodes,):
                raise GraphValidationError("mask length does not match node count")
            return nodes
        if isinstance(nodes, np.ndarray) and np.issubdtype(nodes.dtype, np.integer):
            idx = nodes
        else:
            idx = self.indices_of(nodes)
        mask = np.zeros(self.n_nodes, dtype=bool)
        mask[idx] = True
        return mask


class OwnershipGraph(DiGraph):
    """Ownership network: edge ``s -> t`` with weight ``a`` means s holds share a of t.

    Use :meth:`from_records` or :meth:`from_arrays` rather than the raw
    constructor when loading untrusted data; those merge parallel edges and
    enforce the ownership rules (no self-loops, shares in (0, 1], incoming
    shares of every firm summing to at most one).
    """

    def __init__(self, node_ids, src, dst, share, *, country=None, nace=None,
                 is_tnc=None, operating_revenue=None, merged_edges: int = 0):
        super().__init__(node_ids, src, dst, share)
        n = self.n_nodes
        self.country = _frozen(
            np.full(n, UNKNOWN_COUNTRY, dtype="<U2") if country is None
            else np.asarray(country, dtype="<U2")
        )
        self.nace = _frozen(
            np.full(n, UNKNOWN_NACE, dtype=np.int64) if nace is None
            else np.asarray(nace, dtype=np.int64)
        )
        self.is_tnc = _frozen(
            np.zeros(n, dtype=bool) if is_tnc is None else np.asarray(is_tnc, dtype=bool)
        )
        self.operating_revenue = _frozen(
            np.full(n, np.nan) if operating_revenue is None
            else np.asarray(operating_revenue, dtype=np.float64)
        )
        for name in ("country", "nace", "is_tnc", "operating_revenue"):
            if getattr(self, name).shape != (n,):
                raise GraphValidationError(f"{name} must have one entry per node")
        self.merged_edges = merged_edges

    @property
    def share(self) -> np.ndarray:
        return self.weight

    @classmethod
    def from_arrays(cls, node_ids, src, dst, share, *, on_violation: str = "reject",
                    **attrs) -> "OwnershipGraph":
        """Validate and build a graph from index arrays.

        Parallel edges are merged by summing their shares. ``on_violation``
        selects what happens when a firm's incoming shares exceed one:
        ``"reject"`` raises, ``"clamp"`` rescales that firm's incoming shares
        so they sum to exactly one.
        """
        if on_violation not in ("reject", "clamp"):
            raise ValueError("on_violation must be 'reject' or 'clamp'")
        n = len(node_ids)
        src = np.asarray(src, dtype=np.int64)
        dst = np.asarray(dst, dtype=np.int64)
        share = np.asarray(share, dtype=np.float64)
        if not (src.shape == dst.shape == share.shape):
            raise GraphValidationError("edge arrays differ in length")
        if len(src) and (min(src.min(), dst.min()) < 0 or max(src.max(), dst.max()) >= n):
            raise GraphValidationError("edge endpoint outside node range")
        loops = src == dst
        if loops.any():
            i = int(np.flatnonzero(loops)[0])
            raise GraphValidationError(f"self-loop on node {node_ids[src[i]]!r}")
        bad = ~((share > 0) & (share <= 1))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise GraphValidationError(
                f"share {share[i]!r} on edge {node_ids[src[i]]!r}->{node_ids[dst[i]]!r} "
                "is outside (0, 1]"
            )

        key = src * max(n, 1) + dst
        uniq, inv = np.unique(key, return_inverse=True)
        merged = len(key) - len(uniq)
        if merged:
            share = np.bincount(inv, weights=share, minlength=len(uniq))
            src, dst = uniq // n, uniq % n
            logger.info("merged %d parallel edges", merged)
        else:
            order = np.argsort(key, kind="stable")
            src, dst, share = src[order], dst[order], share[order]

        incoming = np.bincount(dst, weights=share, minlength=n)
        over = incoming > 1 + SHARE_EPS
        if over.any():
            if on_violation == "reject":
                j = int(np.flatnonzero(over)[0])
                raise GraphValidationError(
                    f"incoming shares of {node_ids[j]!r} sum to {incoming[j]:.6g} > 1 "
                    f"({int(over.sum())} firms affected)"
                )
            scale = np.where(over, 1.0 / np.where(over, incoming, 1.0), 1.0)
            share = np.minimum(share * scale[dst], 1.0)
            logger.warning("clamped incoming shares of %d firms", int(over.sum()))

        _validate_attrs(node_ids, attrs)
        return cls(node_ids, src, dst, share, merged_edges=merged, **attrs)

    @classmethod
    def from_records(cls, nodes: Sequence[NodeRecord],
                     edges: Iterable[tuple[str, str, float]], *,
                     on_violation: str = "reject") -> "OwnershipGraph":
        ids = [nd.id for nd in nodes]
        index = {v: i for i, v in enumerate(ids)}
        if len(index) != len(ids):
            raise GraphValidationError("node ids must be unique")
        src, dst, share = [], [], []
        for s, t, a in edges:
            for v in (s, t):
                if v not in index:
                    raise GraphValidationError(f"edge endpoint {v!r} is not a known node")
            src.append(index[s])
            dst.append(index[t])
            share.append(float(a))
        rev = [np.nan if nd.operating_revenue is None else nd.operating_revenue for nd in nodes]
        return cls.from_arrays(
            ids, src, dst, share, on_violation=on_violation,
            country=[nd.country for nd in nodes], nace=[nd.nace for nd in nodes],
            is_tnc=[nd.is_tnc for nd in nodes], operating_revenue=rev,
        )

    def node_record(self, node: str) -> NodeRecord:
        i = self.index[node]
        rev = self.operating_revenue[i]
        return NodeRecord(node, str(self.country[i]), int(self.nace[i]), bool(self.is_tnc[i]),
                          None if np.isnan(rev) else float(rev))

    def attrs(self) -> dict[str, np.ndarray]:
        return {"country": self.country, "nace": self.nace, "is_tnc": self.is_tnc,
                "operating_revenue": self.operating_revenue}

    def subgraph(self, nodes) -> "OwnershipGraph":
        mask = self._as_mask(nodes)
        kept, s, t, emask = self._edge_subset(mask)
        return OwnershipGraph(
            [self.node_ids[i] for i in kept], s, t, self.weight[emask],
            **{k: v[kept] for k, v in self.attrs().items()},
        )

    def reversed(self) -> DiGraph:
        # a reversed ownership graph violates the share rules, so drop to DiGraph
        return DiGraph(self.node_ids, self.dst, self.src, self.weight)

    def with_edges(self, src, dst, share) -> "OwnershipGraph":
        """Same nodes and attributes, new (trusted) edge list."""
        return OwnershipGraph(self.node_ids, src, dst, share, **self.attrs())


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def _validate_attrs(node_ids, attrs) -> None:
    country = attrs.get("country")
    if country is not None:
        for v, c in zip(node_ids, country):
            if not _COUNTRY_RE.match(str(c)):
                raise GraphValidationError(f"invalid country code {c!r} on node {v!r}")
    nace = attrs.get("nace")
    if nace is not None:
        nace = np.asarray(nace, dtype=np.int64)
        bad = ~(((nace >= 0) & (nace <= 9999)) | (nace == UNKNOWN_NACE))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise GraphValidationError(f"invalid NACE code {nace[i]} on node {node_ids[i]!r}")
    rev = attrs.get("operating_revenue")
    if rev is not None:
        rev = np.asarray(rev, dtype=np.float64)
        if (rev < 0).any():
            raise GraphValidationError("operating revenue must be non-negative")
