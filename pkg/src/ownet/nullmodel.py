"""Degree- and holdings-preserving rewired ensembles."""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .community import ModularityView, StageRecord, louvain
from .graph import SHARE_EPS, OwnershipGraph, OwnetError


SWAP_CHUNK = 1 << 20


class RewireError(OwnetError):
    pass


@dataclass(frozen=True)
class RewireConfig:
    n_swaps_per_edge: float = 10
    n_realizations: int = 20
    base_seed: int = 0
    max_reject_streak: int = 10**5

    def __post_init__(self):
        if self.n_swaps_per_edge <= 0 or self.n_realizations <= 0 or self.max_reject_streak <= 0:
            raise ValueError("rewire parameters must be positive")


def rewire(g: OwnershipGraph, cfg: RewireConfig, realization_index: int = 0,
           seed: int | None = None) -> OwnershipGraph:
    """One rewired realization of ``g``.

    Runs ``ceil(n_swaps_per_edge * E)`` double-edge swap attempts. Every
    node keeps its in-degree, out-degree and total holdings; incoming shares
    of every firm stay at most one. ``seed`` defaults to
    ``cfg.base_seed + realization_index``.
    """
    m = g.n_edges
    if m < 2:
        return g.with_edges(g.src, g.dst, g.share)
    if seed is None:
        seed = cfg.base_seed + realization_index
    src = np.array(g.src)
    dst = np.array(g.dst)
    share = np.array(g.share)
    n = g.n_nodes
    size = 8
    while size < 2 * m:
        size *= 2
    table = np.empty(size, dtype=np.int64)
    slot = np.empty(m, dtype=np.int64)
    _kernels.edge_table(src, dst, n, table, slot)
    in_sum = np.bincount(dst, weights=share, minlength=n)
    state = np.array([0, 0, m], dtype=np.int64)
    rng = np.random.default_rng(seed)
    remaining = math.ceil(cfg.n_swaps_per_edge * m)
    while remaining > 0:
        c = min(remaining, SWAP_CHUNK)
        e1 = rng.integers(m, size=c)
        e2 = rng.integers(m - 1, size=c)
        e2 += e2 >= e1
        if _kernels.swap_edges(src, dst, share, n, in_sum, table, slot, state, e1, e2,
                               cfg.max_reject_streak, SHARE_EPS):
            raise RewireError(
                f"more than {cfg.max_reject_streak} consecutive swaps rejected; "
                "the graph is too constrained to rewire"
            )
        remaining -= c
    return g.with_edges(src, dst, share)


@dataclass
class Realization:
    index: int
    seed: int
    n_communities: int
    n_links_between: int
    modularity: float
    community_sizes: list[int]
    labels: np.ndarray | None = field(default=None, repr=False)


@dataclass
class EnsembleSummary:
    empirical_modularity: float
    empirical_n_communities: int
    empirical_n_links_between: int
    realizations: list[Realization]
    config: RewireConfig
    community_seed: int

    def _agg(self, attr):
        v = np.array([getattr(r, attr) for r in self.realizations], dtype=float)
        return float(v.mean()), float(v.std())

    @property
    def modularity_mean_std(self):
        return self._agg("modularity")

    @property
    def n_communities_mean_std(self):
        return self._agg("n_communities")

    @property
    def n_links_mean_std(self):
        return self._agg("n_links_between")

    @property
    def z_score(self) -> float:
        mean, std = self.modularity_mean_std
        diff = self.empirical_modularity - mean
        if std == 0:
            return 0.0 if diff == 0 else math.copysign(math.inf, diff)
        return diff / std

    def as_dict(self) -> dict:
        qm, qs = self.modularity_mean_std
        cm, cs = self.n_communities_mean_std
        lm, ls = self.n_links_mean_std
        return {
            "n_realizations": len(self.realizations),
            "n_swaps_per_edge": self.config.n_swaps_per_edge,
            "base_seed": self.config.base_seed,
            "community_seed": self.community_seed,
            "empirical": {"modularity": self.empirical_modularity,
                          "n_communities": self.empirical_n_communities,
                          "n_links_between": self.empirical_n_links_between},
            "ensemble": {"modularity_mean": qm, "modularity_std": qs,
                         "n_communities_mean": cm, "n_communities_std": cs,
                         "n_links_between_mean": lm, "n_links_between_std": ls},
            "z_score": self.z_score,
            "realizations": [
                {"index": r.index, "seed": r.seed, "n_communities": r.n_communities,
                 "n_links_between": r.n_links_between, "modularity": r.modularity}
                for r in self.realizations
            ],
        }


def _workers(workers: int | None) -> int:
    if workers is None:
        workers = int(os.environ.get("OWNET_WORKERS", "1"))
    return max(1, workers)


def ensemble_compare(g: OwnershipGraph, cfg: RewireConfig, community_seed: int = 0,
                     workers: int | None = None, keep_labels: bool = False,
                     empirical: StageRecord | None = None) -> EnsembleSummary:
    """Compare the modularity of ``g`` with ``cfg.n_realizations`` rewired copies.

    All graphs are partitioned with the same community seed. ``empirical``
    is the final stage record of ``g`` when already known. Realizations
    run on a thread pool (the compiled kernels release the GIL).
    """
    last = empirical
    if last is None:
        last = louvain(ModularityView.from_graph(g), seed=community_seed).stage_log[-1]

    def run(i: int) -> Realization:
        seed = cfg.base_seed + i
        r = rewire(g, cfg, i)
        rhp = louvain(ModularityView.from_graph(r), seed=community_seed)
        rl = rhp.stage_log[-1]
        return Realization(i, seed, rl.n_communities, rl.n_links, rl.modularity,
                           sorted(rhp.community_sizes().tolist(), reverse=True),
                           rhp.final if keep_labels else None)

    idx = range(cfg.n_realizations)
    n_workers = _workers(workers)
    if n_workers > 1:
        with ThreadPoolExecutor(n_workers) as pool:
            reals = list(pool.map(run, idx))
    else:
        reals = [run(i) for i in idx]
    return EnsembleSummary(last.modularity, last.n_communities, last.n_links, reals, cfg,
                           community_seed)
