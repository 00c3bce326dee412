"""Transnational-root detection and snowball extraction."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .graph import UNKNOWN_COUNTRY, GraphValidationError, OwnershipGraph
from .topology import reachable

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractionConfig:
    tnc_share_threshold: float = 0.10
    root_ids: tuple[str, ...] | None = None

    def __post_init__(self):
        if not 0 < self.tnc_share_threshold <= 1:
            raise ValueError("tnc_share_threshold must lie in (0, 1]")


def detect_tncs(g: OwnershipGraph, cfg: ExtractionConfig = ExtractionConfig()) -> set[str]:
    """Firms holding at least the threshold share of some firm in another country.

    Edges touching a firm without a country code are ignored; the number of
    such firms is logged as a warning.
    """
    known = g.country != UNKNOWN_COUNTRY
    n_missing = int((~known).sum())
    if n_missing:
        logger.warning("%d nodes without country code skipped in TNC detection", n_missing)
    s, t = g.src, g.dst
    hit = (
        (g.share >= cfg.tnc_share_threshold)
        & known[s] & known[t]
        & (g.country[s] != g.country[t])
    )
    return {g.node_ids[i] for i in np.unique(s[hit])}


def closure_mask(g: OwnershipGraph, roots) -> np.ndarray:
    """Roots, everything they own directly or indirectly, and every owner of that set."""
    roots = list(roots)
    if not roots:
        raise GraphValidationError("snowball extraction needs at least one root")
    missing = [r for r in roots if r not in g.index]
    if missing:
        raise GraphValidationError(f"unknown root id {missing[0]!r}")
    down = reachable(g.out_csr, g.indices_of(roots))
    return reachable(g.in_csr, np.flatnonzero(down))


def snowball_extract(g: OwnershipGraph, roots) -> OwnershipGraph:
    """Induced subgraph on the downstream-then-upstream closure of ``roots``."""
    return g.subgraph(closure_mask(g, roots))


def extract(g: OwnershipGraph, cfg: ExtractionConfig = ExtractionConfig()) -> tuple[OwnershipGraph, set[str]]:
    """Detect roots (unless given) and extract; also marks the roots as TNCs."""
    roots = set(cfg.root_ids) if cfg.root_ids is not None else detect_tncs(g, cfg)
    sub = snowball_extract(g, sorted(roots))
    flags = np.array([v in roots for v in sub.node_ids]) | sub.is_tnc
    attrs = sub.attrs()
    attrs["is_tnc"] = flags
    return OwnershipGraph(sub.node_ids, sub.src, sub.dst, sub.share, **attrs), roots
