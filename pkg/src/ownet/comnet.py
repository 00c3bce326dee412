"""Community network: aggregation, impact matrix and DebtRank centrality."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .characterize import DEFAULT_SECTORS, MacroSector, SectorMap, profile, attribute_values
from .graph import DiGraph, OwnershipGraph


@dataclass
class CommunityNetwork:
    """Counts of ownership relations between and within communities.

    ``counts[i, j]`` is the number of edges from a firm of ``community_ids[i]``
    to a firm of ``community_ids[j]``; the diagonal holds internal edges.
    Communities are ordered by size (largest first) unless given explicitly.
    """

    community_ids: np.ndarray
    counts: sp.csr_matrix
    sizes: np.ndarray

    @property
    def n_communities(self) -> int:
        return len(self.community_ids)

    def dense(self) -> np.ndarray:
        return self.counts.toarray()

    def internal(self) -> np.ndarray:
        return self.counts.diagonal()

    def digraph(self) -> DiGraph:
        """Network of communities without self-loops, weighted by link counts."""
        coo = self.counts.tocoo()
        off = coo.row != coo.col
        ids = [f"c{c}" for c in self.community_ids.tolist()]
        return DiGraph(ids, coo.row[off], coo.col[off], coo.data[off])


def ranked_communities(labels, top_k: int | None = None) -> np.ndarray:
    """Community labels sorted by size descending, ties by label."""
    ids, sizes = np.unique(np.asarray(labels), return_counts=True)
    order = np.lexsort((ids, -sizes))
    ranked = ids[order]
    return ranked if top_k is None else ranked[:top_k]


def aggregate(g: DiGraph, labels, top_k: int | None = None,
              communities=None) -> CommunityNetwork:
    """Count firm-level edges between communities.

    With ``top_k`` only the largest communities are kept; ``communities``
    fixes the exact list (and order) instead, which may include communities
    that no longer have members.
    """
    labels = np.asarray(labels)
    if labels.shape != (g.n_nodes,):
        raise ValueError("partition must assign one label per node")
    if communities is None:
        communities = ranked_communities(labels, top_k)
    communities = np.asarray(communities)
    c = len(communities)
    pos = {int(x): i for i, x in enumerate(communities.tolist())}
    node_pos = np.array([pos.get(int(x), -1) for x in labels.tolist()], dtype=np.int64)
    s, t = node_pos[g.src], node_pos[g.dst]
    keep = (s >= 0) & (t >= 0)
    counts = sp.csr_matrix((np.ones(int(keep.sum()), dtype=np.int64), (s[keep], t[keep])),
                           shape=(c, c))
    counts.sum_duplicates()
    sizes = np.bincount(node_pos[node_pos >= 0], minlength=c)
    return CommunityNetwork(communities, counts, sizes)


def sector_mask(g: OwnershipGraph, sector: MacroSector | str,
                sectors: SectorMap = DEFAULT_SECTORS) -> np.ndarray:
    """True for firms outside ``sector``."""
    return ~sectors.contains(g.nace, sector)


def remove_sector(g: OwnershipGraph, sector: MacroSector | str,
                  sectors: SectorMap = DEFAULT_SECTORS) -> OwnershipGraph:
    """Drop every firm of ``sector`` together with all its edges."""
    return g.subgraph(sector_mask(g, sector, sectors))


@dataclass
class ImpactMatrix:
    W: np.ndarray
    beta: float
    degenerate: np.ndarray  # communities with no internal links


def impact_matrix(cn: CommunityNetwork, beta: float | None = None) -> ImpactMatrix:
    """``W[i, j] = beta * A[j, i] / A[j, j]``: exposure of community j to i.

    Columns of communities without internal links are zero and flagged.
    ``beta`` defaults to the number of communities.
    """
    a = cn.dense().astype(np.float64)
    if beta is None:
        beta = float(cn.n_communities)
    diag = np.diag(a).copy()
    degenerate = diag == 0
    with np.errstate(divide="ignore", invalid="ignore"):
        w = beta * a.T / np.where(degenerate, 1.0, diag)[None, :]
    w[:, degenerate] = 0.0
    np.fill_diagonal(w, 0.0)
    return ImpactMatrix(w, float(beta), degenerate)


@dataclass
class DebtRankResult:
    R: float
    h: np.ndarray
    h_initial: np.ndarray
    iterations: int
    v: np.ndarray
    history: list[np.ndarray] = field(default_factory=list, repr=False)


def debtrank(W, v, seeds, psi: float = 1.0, cap: bool = True,
             record_history: bool = False) -> DebtRankResult:
    """Propagate distress from ``seeds`` along impacts ``W[i, j]`` (i hits j).

    Every node spreads distress at most once: while distressed it adds
    ``W[i, j] * h[i]`` to each active neighbour, then becomes inactive. With
    ``cap`` single impacts are limited to one. R is the value-weighted
    distress gained beyond the initial shock.
    """
    W = np.asarray(W, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    n = W.shape[0]
    if W.shape != (n, n) or v.shape != (n,):
        raise ValueError("W must be square and v must match its size")
    if (v < 0).any() or not math.isclose(v.sum(), 1.0, rel_tol=0, abs_tol=1e-9):
        raise ValueError("v must be non-negative and sum to 1")
    seeds = np.atleast_1d(np.asarray(seeds, dtype=np.int64))
    if seeds.size == 0:
        raise ValueError("seed set must be non-empty")
    impact = np.minimum(W, 1.0) if cap else W

    h = np.zeros(n)
    h[seeds] = psi
    h0 = h.copy()
    distressed = np.zeros(n, dtype=bool)
    distressed[seeds] = psi > 0
    inactive = np.zeros(n, dtype=bool)
    history = [h.copy()] if record_history else []
    steps = 0
    while distressed.any():
        push = (h * distressed) @ impact
        active = ~inactive
        new_h = h.copy()
        new_h[active] = np.minimum(1.0, h[active] + push[active])
        raised = (h == 0) & (new_h > 0) & active & ~distressed
        inactive |= distressed
        distressed = raised
        h = new_h
        steps += 1
        if record_history:
            history.append(h.copy())
    R = float(h @ v - h0 @ v)
    return DebtRankResult(R, h, h0, steps, v, history)


def value_vector(sizes, mode: str = "size") -> np.ndarray:
    sizes = np.asarray(sizes, dtype=np.float64)
    if mode == "uniform" or sizes.sum() == 0:
        return np.full(len(sizes), 1.0 / len(sizes))
    if mode == "size":
        return sizes / sizes.sum()
    raise ValueError(f"unknown value mode {mode!r}")


def _debtrank_rows(g: OwnershipGraph, labels, communities, beta, value, cap, psi, sectors):
    cn = aggregate(g, labels, communities=communities)
    im = impact_matrix(cn, beta)
    v = value_vector(cn.sizes, value)
    country = attribute_values(g, "country")
    sector = attribute_values(g, "sector", sectors)
    rows = []
    for i, c in enumerate(cn.community_ids.tolist()):
        members = labels == c
        if cn.sizes[i] == 0:
            rows.append({"community_id": int(c), "rank": i + 1, "R": 0.0, "size": 0,
                         "country": "", "sector": "", "empty": True})
            continue
        res = debtrank(im.W, v, [i], psi=psi, cap=cap)
        p = profile(int(c), country[members], sector[members])
        rows.append({"community_id": int(c), "rank": i + 1, "R": res.R,
                     "size": int(cn.sizes[i]), "country": p.c1 or "", "sector": p.s1 or "",
                     "empty": False})
    return rows, im


def centrality_report(g: OwnershipGraph, labels, top_k: int = 50,
                      sector_filter: MacroSector | str | None = None,
                      beta: float | None = None, value: str = "size", cap: bool = True,
                      psi: float = 1.0, sectors: SectorMap = DEFAULT_SECTORS) -> dict:
    """DebtRank of each of the ``top_k`` largest communities, singleton seeds.

    With ``sector_filter`` a second variant is computed on the same
    communities after the sector's firms and their edges are removed.
    ``beta`` defaults to the number of communities in the view.
    """
    labels = np.asarray(labels)
    communities = ranked_communities(labels, top_k)
    if beta is None:
        beta = float(len(communities))
    full, im = _debtrank_rows(g, labels, communities, beta, value, cap, psi, sectors)
    out = {"beta": beta, "top_k": len(communities), "full": full,
           "degenerate": [int(c) for c, d in zip(communities, im.degenerate) if d]}
    if sector_filter is not None:
        keep = sector_mask(g, sector_filter, sectors)
        filtered, _ = _debtrank_rows(g.subgraph(keep), labels[keep], communities, beta,
                                     value, cap, psi, sectors)
        out["filtered"] = filtered
        out["sector_filter"] = MacroSector(sector_filter).value
    return out


def radial_layout(rows: list[dict]) -> list[dict]:
    """Polar coordinates for plotting: angle by rank, radius ``1 - R / max R``."""
    k = len(rows)
    r_max = max((r["R"] for r in rows), default=0.0)
    out = []
    for r in rows:
        radius = 1.0 - r["R"] / r_max if r_max > 0 else 1.0
        out.append({"community_id": r["community_id"], "rank": r["rank"],
                    "angle": 2 * math.pi * (r["rank"] - 1) / k, "radius": radius,
                    "R": r["R"], "size": r["size"]})
    return out


def community_table(g: OwnershipGraph, labels, top_k: int = 8,
                    sector_filter: MacroSector | str | None = None,
                    sectors: SectorMap = DEFAULT_SECTORS) -> list[dict]:
    """Size, internal relations and internal density per top community."""
    labels = np.asarray(labels)
    communities = ranked_communities(labels, top_k)
    variants = [("", g, labels)]
    if sector_filter is not None:
        keep = sector_mask(g, sector_filter, sectors)
        variants.append(("filtered_", g.subgraph(keep), labels[keep]))
    rows = [{"community_id": int(c), "rank": i + 1} for i, c in enumerate(communities.tolist())]
    for prefix, gg, lab in variants:
        cn = aggregate(gg, lab, communities=communities)
        for row, n, rel in zip(rows, cn.sizes.tolist(), cn.internal().tolist()):
            row[prefix + "n_firms"] = int(n)
            row[prefix + "n_rel"] = int(rel)
            row[prefix + "density"] = rel / (n * (n - 1)) if n >= 2 else 0.0
    return rows


def cross_link_share(g: OwnershipGraph, labels, sector: MacroSector | str,
                     sectors: SectorMap = DEFAULT_SECTORS) -> float:
    """Fraction of cross-community edges with a firm of ``sector`` at either end."""
    labels = np.asarray(labels)
    cross = labels[g.src] != labels[g.dst]
    if not cross.any():
        return 0.0
    in_sector = ~sector_mask(g, sector, sectors)
    touched = in_sector[g.src] | in_sector[g.dst]
    return float((cross & touched).sum() / cross.sum())
