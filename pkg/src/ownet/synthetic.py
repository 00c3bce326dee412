"""Planted-block ownership graphs for testing and benchmarking."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .characterize import DEFAULT_SECTORS, MacroSector
from .graph import GraphValidationError, OwnershipGraph

COUNTRY_POOL = (
    "US", "GB", "DE", "FR", "JP", "IT", "ES", "NL", "CA", "CH", "SE", "BE", "KR", "CN",
    "AU", "AT", "DK", "NO", "FI", "IE", "LU", "BM", "KY", "SG", "HK", "IN", "BR", "PL",
    "PT", "TW", "RU", "ZA", "MX", "GR", "IL", "CZ", "HU", "RO", "TH", "MY",
)
BLOCK_SECTORS = tuple(s for s in MacroSector if s is not MacroSector.FINANCIAL)


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of a planted-block directed graph.

    ``p_in`` / ``p_out`` are the probabilities of each ordered pair inside /
    across blocks. Fidelities give the fraction of a block's nodes that carry
    the block's country and macro-sector. Optional hub firms (a fraction of
    every block, tagged with ``hub_sector``) add cross-block holdings with
    probability ``hub_p_out`` per ordered pair.
    """

    n_nodes: int
    n_blocks: int
    p_in: float
    p_out: float
    country_fidelity: float = 1.0
    sector_fidelity: float = 1.0
    seed: int = 0
    hub_fraction: float = 0.0
    hub_p_out: float = 0.0
    hub_sector: str = "financial"
    countries: tuple[str, ...] = field(default=COUNTRY_POOL)

    def __post_init__(self):
        if self.n_nodes < 1 or not 1 <= self.n_blocks <= self.n_nodes:
            raise ValueError("need 1 <= n_blocks <= n_nodes")
        if not 0 <= self.p_out < self.p_in <= 1:
            raise ValueError("need 0 <= p_out < p_in <= 1")
        for name in ("country_fidelity", "sector_fidelity", "hub_fraction", "hub_p_out"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in [0, 1]")
        if len(self.countries) < 2:
            raise ValueError("need at least two countries")

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticSpec":
        d = dict(d)
        if "countries" in d:
            d["countries"] = tuple(d["countries"])
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["countries"] = list(self.countries)
        return d


def block_sizes(n: int, b: int) -> np.ndarray:
    sizes = np.full(b, n // b)
    sizes[: n % b] += 1
    return sizes


def planted_labels(spec: SyntheticSpec) -> np.ndarray:
    return np.repeat(np.arange(spec.n_blocks), block_sizes(spec.n_nodes, spec.n_blocks))


def _within_block(rng, start: int, size: int, p: float):
    pairs = size * (size - 1)
    k = rng.binomial(pairs, p) if pairs else 0
    if k == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    idx = rng.choice(pairs, size=k, replace=False)
    i = idx // (size - 1)
    r = idx % (size - 1)
    j = r + (r >= i)
    return start + i, start + j


def _across_blocks(rng, sources: np.ndarray, block: np.ndarray, n_pairs: int, p: float):
    """Uniform random subset of cross-block pairs (source from ``sources``)."""
    k = rng.binomial(n_pairs, p) if n_pairs else 0
    n = len(block)
    got = np.zeros(0, dtype=np.int64)
    while len(got) < k:
        need = k - len(got)
        s = sources[rng.integers(len(sources), size=2 * need + 16)]
        t = rng.integers(n, size=len(s))
        ok = block[s] != block[t]
        cand = s[ok] * n + t[ok]
        got = np.concatenate([got, cand[~np.isin(cand, got)]])
        got = got[np.sort(np.unique(got, return_index=True)[1])][:k]
    return got // n, got % n


def _nace_in(sector: str, rng, size: int) -> np.ndarray:
    lo, hi = next((lo, hi) for s, lo, hi in DEFAULT_SECTORS.ranges if s.value == sector)
    return rng.integers(lo, hi, size=size)


def generate_synthetic(spec: SyntheticSpec) -> OwnershipGraph:
    """Draw a planted-block ownership graph; identical specs give identical graphs."""
    rng = np.random.default_rng(spec.seed)
    n = spec.n_nodes
    sizes = block_sizes(n, spec.n_blocks)
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    block = planted_labels(spec)

    src_parts, dst_parts = [], []
    for start, size in zip(starts, sizes):
        s, t = _within_block(rng, int(start), int(size), spec.p_in)
        src_parts.append(s)
        dst_parts.append(t)
    cross_pairs = n * (n - 1) - int((sizes * (sizes - 1)).sum())
    if spec.p_out > 0:
        s, t = _across_blocks(rng, np.arange(n), block, cross_pairs, spec.p_out)
        src_parts.append(s)
        dst_parts.append(t)

    # attributes
    countries = np.asarray(spec.countries, dtype="<U2")
    country = np.empty(n, dtype="<U2")
    nace = np.empty(n, dtype=np.int64)
    for b, (start, size) in enumerate(zip(starts, sizes)):
        home = b % len(countries)
        n_home = int(round(spec.country_fidelity * size))
        others = np.delete(np.arange(len(countries)), home)
        c = np.concatenate([np.full(n_home, home), rng.choice(others, size=size - n_home)])
        country[start:start + size] = countries[rng.permutation(c)]
        sector = BLOCK_SECTORS[b % len(BLOCK_SECTORS)].value
        n_sec = int(round(spec.sector_fidelity * size))
        other_secs = [s.value for s in MacroSector if s.value != sector]
        codes = np.concatenate(
            [_nace_in(sector, rng, n_sec)]
            + [_nace_in(other_secs[j], rng, 1) for j in rng.integers(len(other_secs), size=size - n_sec)]
        )
        nace[start:start + size] = rng.permutation(codes)

    if spec.hub_fraction > 0:
        hubs = []
        for start, size in zip(starts, sizes):
            h = int(round(spec.hub_fraction * size))
            hubs.append(start + rng.choice(size, size=h, replace=False))
        hubs = np.sort(np.concatenate(hubs)).astype(np.int64)
        nace[hubs] = _nace_in(spec.hub_sector, rng, len(hubs))
        if spec.hub_p_out > 0 and len(hubs):
            hub_pairs = int(sum(n - sizes[block[h]] for h in hubs))
            s, t = _across_blocks(rng, hubs, block, hub_pairs, spec.hub_p_out)
            src_parts.append(s)
            dst_parts.append(t)

    src = np.concatenate(src_parts).astype(np.int64)
    dst = np.concatenate(dst_parts).astype(np.int64)
    key = np.unique(src * n + dst)
    src, dst = key // n, key % n

    k_in = np.bincount(dst, minlength=n)
    share = (1.0 - rng.random(len(src))) / np.maximum(k_in[dst], 1)
    incoming = np.bincount(dst, weights=share, minlength=n)
    over = incoming > 1
    if over.any():
        share = share / np.where(over, incoming, 1.0)[dst]
    if not np.all(share > 0):
        raise GraphValidationError("share constraint cannot be met for this spec")

    width = len(str(max(n - 1, 0)))
    ids = [f"n{i:0{width}d}" for i in range(n)]
    revenue = np.round(rng.lognormal(mean=10.0, sigma=2.0, size=n), 2)
    return OwnershipGraph(ids, src, dst, share, country=country, nace=nace,
                          operating_revenue=revenue)
