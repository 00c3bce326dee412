"""Attribute profiles of communities: concentration, dominance and over-expression."""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from importlib import resources

import numpy as np
from . import _kernels

from .graph import UNKNOWN_COUNTRY, UNKNOWN_NACE


class MacroSector(str, Enum):
    PRIMARY = "primary"
    MANUFACTURING = "manufacturing"
    SERVICES = "services"
    FINANCIAL = "financial"
    REAL_ESTATE_BUSINESS = "real_estate_business"
    STATE_SOCIAL = "state_social"


UNKNOWN_SECTOR = "??"


class SectorMap:
    """NACE code -> macro-sector lookup built from half-open code ranges."""

    def __init__(self, ranges, fallback: str):
        self.ranges = [(MacroSector(name), int(lo), int(hi)) for name, lo, hi in ranges]
        self.fallback = MacroSector(fallback)
        table = np.array([self.fallback.value] * 10000, dtype="<U20")
        for sector, lo, hi in self.ranges:
            table[max(lo, 0):min(hi, 10000)] = sector.value
        self._table = table

    @classmethod
    def load(cls, path=None) -> "SectorMap":
        if path is None:
            text = resources.files("ownet.data").joinpath("macro_sectors.json").read_text()
        else:
            with open(path) as fh:
                text = fh.read()
        cfg = json.loads(text)
        return cls(cfg["ranges"], cfg["fallback"])

    def __call__(self, nace) -> np.ndarray:
        nace = np.asarray(nace, dtype=np.int64)
        out = np.full(nace.shape, UNKNOWN_SECTOR, dtype="<U20")
        ok = (nace >= 0) & (nace <= 9999)
        out[ok] = self._table[nace[ok]]
        return out

    def contains(self, nace, sector: MacroSector | str) -> np.ndarray:
        return self(nace) == MacroSector(sector).value


DEFAULT_SECTORS = SectorMap.load()


def _regions() -> dict[str, str]:
    cfg = json.loads(resources.files("ownet.data").joinpath("regions.json").read_text())
    return {c: region for region, codes in cfg.items() for c in codes}


REGION_OF = _regions()


def region_key(country: str) -> str:
    return REGION_OF.get(country, "OTHER")


def herfindahl(counts) -> float:
    """Sum of squared shares of non-negative counts."""
    c = np.asarray(counts, dtype=np.float64)
    if (c < 0).any():
        raise ValueError("counts must be non-negative")
    total = c.sum()
    if total <= 0:
        raise ValueError("herfindahl of all-zero counts")
    s = c / total
    return float((s * s).sum())


def attribute_values(g, attribute: str, sectors: SectorMap = DEFAULT_SECTORS) -> np.ndarray:
    """Per-node attribute labels; missing values become ``"??"``."""
    if attribute == "country":
        return np.asarray(g.country, dtype="<U20")
    if attribute == "sector":
        return sectors(g.nace)
    if attribute == "nace":
        out = np.asarray(g.nace).astype("<U20")
        out[np.asarray(g.nace) == UNKNOWN_NACE] = UNKNOWN_SECTOR
        return out
    raise ValueError(f"unknown attribute {attribute!r}")


def _ranked(values: np.ndarray) -> list[tuple[str, int]]:
    vals = values[values != UNKNOWN_COUNTRY]
    if vals.size == 0:
        return []
    u, c = np.unique(vals, return_counts=True)
    order = np.lexsort((u, -c))  # count desc, then lexicographic
    return [(str(u[i]), int(c[i])) for i in order]


@dataclass
class CommunityProfile:
    community: int
    n_firms: int
    herf_country: float
    share_c1: float
    c1: str | None
    c2: str | None
    herf_sector: float
    share_s1: float
    s1: str | None
    s2: str | None
    missing: bool = False

    def as_row(self) -> dict:
        return {
            "community_id": self.community, "n_firms": self.n_firms,
            "herf_country": self.herf_country, "share_c1": self.share_c1,
            "c1": self.c1 or "", "c2": self.c2 or "",
            "herf_sector": self.herf_sector, "share_s1": self.share_s1,
            "s1": self.s1 or "", "s2": self.s2 or "",
        }


def profile(community: int, countries, sectors) -> CommunityProfile:
    """Table-style row for one community from its members' country and sector labels.

    Shares are taken over members whose attribute is known. When neither
    attribute is known for any member the profile is flagged ``missing``.
    """
    countries = np.asarray(countries, dtype="<U20")
    sectors = np.asarray(sectors, dtype="<U20")
    if countries.size == 0:
        raise ValueError("empty community")
    rc, rs = _ranked(countries), _ranked(sectors)

    def stats(ranked):
        if not ranked:
            return float("nan"), float("nan"), None, None
        counts = [c for _, c in ranked]
        return (herfindahl(counts), counts[0] / sum(counts), ranked[0][0],
                ranked[1][0] if len(ranked) > 1 else None)

    hc, sc, c1, c2 = stats(rc)
    hs, ss, s1, s2 = stats(rs)
    return CommunityProfile(int(community), int(countries.size), hc, sc, c1, c2, hs, ss, s1, s2,
                            missing=not rc and not rs)


def profiles(g, labels, sectors: SectorMap = DEFAULT_SECTORS) -> list[CommunityProfile]:
    """Profiles of every community, largest first (ties by id)."""
    labels = np.asarray(labels)
    country = attribute_values(g, "country")
    sector = attribute_values(g, "sector", sectors)
    order = np.argsort(labels, kind="stable")
    ids, starts = np.unique(labels[order], return_index=True)
    groups = np.split(order, starts[1:])
    out = [profile(int(c), country[m], sector[m]) for c, m in zip(ids, groups)]
    out.sort(key=lambda p: (-p.n_firms, p.community))
    return out


def dominance_summary(profs: list[CommunityProfile], min_size: int = 5) -> dict:
    """Mean dominant-country and dominant-sector shares over communities >= min_size."""
    big = [p for p in profs if p.n_firms >= min_size]
    c = [p.share_c1 for p in big if not np.isnan(p.share_c1)]
    s = [p.share_s1 for p in big if not np.isnan(p.share_s1)]
    return {
        "min_size": min_size,
        "n_communities": len(big),
        "mean_share_c1": float(np.mean(c)) if c else float("nan"),
        "mean_share_s1": float(np.mean(s)) if s else float("nan"),
    }


@dataclass
class OverExpressionReport:
    """Hypergeometric over-expression of attribute values in communities.

    Only pairs with at least one member carrying the value are listed; the
    remaining ``n_tests - len(community)`` pairs have p = 1 by construction.
    """

    attribute: str
    community: np.ndarray
    value: np.ndarray
    k: np.ndarray  # members of the community with the value
    n: np.ndarray  # community size (members with a known value)
    K: np.ndarray  # nodes with the value overall
    N: int
    p_value: np.ndarray
    over_expressed: np.ndarray
    alpha: float
    n_tests: int

    @property
    def threshold(self) -> float:
        return self.alpha / self.n_tests if self.n_tests else 0.0

    def rows(self):
        for i in range(len(self.community)):
            yield {
                "community_id": int(self.community[i]), "value": str(self.value[i]),
                "k": int(self.k[i]), "n": int(self.n[i]), "K": int(self.K[i]), "N": self.N,
                "p_value": float(self.p_value[i]), "over_expressed": bool(self.over_expressed[i]),
            }

    def flagged_for(self, community: int) -> list[tuple[str, int, int]]:
        """Over-expressed ``(value, k, K)`` of one community, most frequent first."""
        sel = np.flatnonzero((self.community == community) & self.over_expressed)
        sel = sel[np.lexsort((self.value[sel], -self.k[sel]))]
        return [(str(self.value[i]), int(self.k[i]), int(self.K[i])) for i in sel]


def hypergeom_sf(k, N, K, n):
    """P[X >= k] for X ~ Hypergeometric(population N, K successes, n draws)."""
    k, N, K, n = np.broadcast_arrays(*(np.asarray(x, dtype=np.float64) for x in (k, N, K, n)))
    shape = k.shape
    p = _kernels.hypergeom_sf(k.ravel(), N.ravel(), K.ravel(), n.ravel())
    return p.reshape(shape) if shape else float(p[0])


def over_expression(labels, values, alpha: float = 0.01,
                    attribute: str = "attribute") -> OverExpressionReport:
    """Bonferroni-corrected hypergeometric test for every (community, value) pair.

    Nodes whose value is ``"??"`` are left out of the universe.
    """
    labels = np.asarray(labels)
    values = np.asarray(values, dtype="<U20")
    known = values != UNKNOWN_COUNTRY
    if not known.any():
        raise ValueError("attribute is not defined on any node")
    lab, val = labels[known], values[known]
    N = int(known.sum())
    comm_ids, comm_idx = np.unique(lab, return_inverse=True)
    val_ids, val_idx = np.unique(val, return_inverse=True)
    n_by_comm = np.bincount(comm_idx)
    K_by_val = np.bincount(val_idx)
    n_tests = len(comm_ids) * len(val_ids)

    pair = comm_idx.astype(np.int64) * len(val_ids) + val_idx
    keys, k = np.unique(pair, return_counts=True)
    ci, vi = keys // len(val_ids), keys % len(val_ids)
    n = n_by_comm[ci]
    K = K_by_val[vi]
    p = np.clip(hypergeom_sf(k, N, K, n), 0.0, 1.0)
    return OverExpressionReport(
        attribute=attribute, community=comm_ids[ci], value=val_ids[vi], k=k, n=n, K=K, N=N,
        p_value=p, over_expressed=p < alpha / n_tests, alpha=alpha, n_tests=n_tests,
    )


def over_expression_rate(report: OverExpressionReport) -> float:
    """Fraction of all tested (community, value) pairs flagged as over-expressed."""
    if report.n_tests == 0:
        raise ValueError("empty report")
    return int(report.over_expressed.sum()) / report.n_tests
