"""End-to-end analysis pipeline with file-based stage hand-off and a run manifest.

Every stage reads its inputs from files written by earlier stages and writes
its own outputs under ``<out_dir>/<stage>/``. The manifest records digests of
all inputs and outputs so that reruns can be compared byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .characterize import (DEFAULT_SECTORS, SectorMap, attribute_values, dominance_summary, over_expression,
                           over_expression_rate, profiles, region_key)
from .community import ModularityView, StageRecord, louvain, subcommunities
from .comnet import (aggregate, centrality_report, community_table, cross_link_share,
                     radial_layout, ranked_communities, sector_mask)
from .extract import ExtractionConfig, extract
from .graph import OwnetError
from .io import (file_digest, read_graph, read_stage_log, read_json, read_membership, read_node_list, read_roots,
                 write_csv, write_graph, write_json)
from .nullmodel import RewireConfig, ensemble_compare
from .powerlaw import ccdf, fit_power_law
from .topology import (bow_tie, component_labels, degree_stats, link_density,
                       shortest_path_stats, _group)

logger = logging.getLogger(__name__)

STAGES = ("extract", "components", "communities", "ensemble", "characterize", "aggregate",
          "topology", "debtrank_full", "debtrank_filtered")


class ConfigError(OwnetError, ValueError):
    pass


class StageFailure(OwnetError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    nodes: str
    edges: str
    seed: int
    out_dir: str
    roots: str | None = None
    tnc_threshold: float = 0.10
    on_violation: str = "reject"
    alpha: float = 0.01
    min_size: int = 5
    n_realizations: int = 20
    n_swaps_per_edge: float = 10
    max_reject_streak: int = 10**5
    top_k_table: int = 8
    top_k_debtrank: int = 50
    sector_filter: str = "financial"
    beta: float | None = None
    value: str = "size"
    path_sample: int = 1000
    sector_map: str | None = None
    workers: int | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        missing = [k for k in ("nodes", "edges", "seed", "out_dir") if d.get(k) is None]
        if missing:
            raise ConfigError(f"missing required config keys: {missing}")
        return cls(**d)

    @classmethod
    def from_json(cls, path, **overrides) -> "PipelineConfig":
        try:
            d = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        d.update({k: v for k, v in overrides.items() if v is not None})
        return cls.from_dict(d)

    def validate(self) -> None:
        for name in ("nodes", "edges", "roots", "sector_map"):
            p = getattr(self, name)
            if p is not None and not Path(p).is_file():
                raise ConfigError(f"{name} file does not exist: {p}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ConfigError("seed must be an integer")
        if not 0 < self.tnc_threshold <= 1:
            raise ConfigError("tnc_threshold must lie in (0, 1]")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.on_violation not in ("reject", "clamp"):
            raise ConfigError("on_violation must be 'reject' or 'clamp'")
        if min(self.min_size, self.n_realizations, self.top_k_table, self.top_k_debtrank,
               self.path_sample) < 1:
            raise ConfigError("sizes and counts must be positive")

    def digest(self) -> str:
        d = asdict(self)
        d.pop("out_dir")
        d.pop("workers")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


def derive_seed(seed: int, label: str) -> int:
    """Stage seed from the run seed; adding stages never shifts existing ones."""
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:4], "big")


@dataclass
class StageRun:
    name: str
    inputs: dict[str, str] = field(default_factory=dict)
    outputs: dict[str, str] = field(default_factory=dict)
    wall_time: float = 0.0
    status: str = "pending"
    error: str | None = None


@dataclass
class RunManifest:
    config_hash: str
    version: str
    out_dir: str
    stages: list[StageRun] = field(default_factory=list)
    status: str = "running"
    failed_stage: str | None = None

    def digests(self) -> dict[str, dict[str, str]]:
        return {s.name: s.outputs for s in self.stages}

    def as_dict(self) -> dict:
        return {
            "config_hash": self.config_hash, "version": self.version, "status": self.status,
            "failed_stage": self.failed_stage,
            "stages": [asdict(s) for s in self.stages],
        }


# ---------------------------------------------------------------------------
# Stage context: records every file a stage reads.

class _Ctx:
    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.out_dir)
        self.sectors = SectorMap.load(cfg.sector_map)
        self.reads: list[Path] = []

    def path(self, *parts) -> Path:
        return self.out.joinpath(*parts)

    def prefix(self, stage: str) -> str:
        return str(self.out / stage) + "/"

    def use(self, *paths) -> list[Path]:
        self.reads.extend(Path(p) for p in paths)
        return [Path(p) for p in paths]

    def graph(self, stage="extract"):
        n, e = self.use(self.path(stage, "nodes.csv"), self.path(stage, "edges.csv"))
        return read_graph(n, e)

    def lcc_graph(self):
        g = self.graph()
        (lcc_file,) = self.use(self.path("components", "lcc_nodes.csv"))
        return g.subgraph(read_node_list(lcc_file))

    def lcc_partition(self):
        g = self.lcc_graph()
        (mfile,) = self.use(self.path("communities", "membership.csv"))
        _, labels = read_membership(mfile, g.node_ids)
        return g, labels


# ---------------------------------------------------------------------------
# Writers shared by the pipeline stages and the CLI subcommands. Each takes an
# output prefix and returns the paths it wrote.

def write_components(g, prefix: str) -> list[Path]:
    groups = _group(component_labels(g, "weak"), g)
    sizes = [len(m) for m in groups]
    files = [write_csv(prefix + "components.csv", ("rank", "size"),
                       ((i + 1, s) for i, s in enumerate(sizes)))]
    rest = sizes[1:]
    fit = None
    files.append(write_csv(prefix + "ccdf.csv", ("x", "p"), ccdf(rest) if rest else []))
    if rest:
        try:
            f = fit_power_law(rest)
            fit = {"exponent": f.exponent, "xmin": f.xmin, "n_tail": f.n_tail, "method": f.method}
        except ValueError as exc:
            fit = {"error": str(exc)}
    lcc = groups[0] if groups else np.zeros(0, dtype=np.int64)
    files.append(write_csv(prefix + "lcc_nodes.csv", ("node_id",),
                           ((g.node_ids[i],) for i in np.sort(lcc))))
    files.append(write_json(prefix + "summary.json", {
        "n_components": len(sizes),
        "lcc_size": sizes[0] if sizes else 0,
        "lcc_fraction": sizes[0] / g.n_nodes if sizes else 0.0,
        "second_size": sizes[1] if len(sizes) > 1 else 0,
        "fraction_below_10": float(np.mean(np.array(sizes) < 10)) if sizes else 0.0,
        "power_law_excluding_lcc": fit,
    }))
    return files


def write_communities(g, seed: int, prefix: str, top_k: int = 8) -> list[Path]:
    hp = louvain(ModularityView.from_graph(g), seed=seed)
    files = [write_csv(prefix + "stages.csv", ("level", "n_nodes", "n_links", "modularity"),
                       ((r.level, r.n_communities, r.n_links, r.modularity) for r in hp.stage_log))]
    levels = hp.levels[1:] if hp.n_levels > 1 else hp.levels
    cols = ["node_id"] + [f"level{i}_id" for i in range(1, len(levels))] + ["final_id"]
    rows = zip(g.node_ids, *[lv.tolist() for lv in levels])
    files.append(write_csv(prefix + "membership.csv", cols, rows))
    files.append(write_csv(prefix + "ccdf.csv", ("x", "p"), ccdf(hp.community_sizes())))
    sub_rows = []
    for rank, c in enumerate(ranked_communities(hp.final, top_k).tolist(), 1):
        s = subcommunities(hp, c)
        sub_rows.append((rank, c, s["size"], len(s["members"]), s["herfindahl_of_sizes"]))
    files.append(write_csv(prefix + "subcommunities.csv",
                           ("rank", "community_id", "n_firms", "n_subcomm", "herf_subcomm_size"),
                           sub_rows))
    return files


def write_ensemble(g, rc: RewireConfig, community_seed: int, prefix: str, *,
                   alpha: float = 0.01, min_size: int = 5, workers: int | None = None,
                   sectors: SectorMap = DEFAULT_SECTORS,
                   empirical: StageRecord | None = None) -> list[Path]:
    """Ensemble comparison plus the characterization of every rewired partition.

    Attributes stay on their firms, so rewired communities show how much
    country and sector concentration arises without the real link pattern.
    """
    summ = ensemble_compare(g, rc, community_seed=community_seed, workers=workers,
                            keep_labels=True, empirical=empirical)
    files = []
    country = attribute_values(g, "country")
    sector = attribute_values(g, "sector", sectors)
    rates_c, rates_s, dom_c, dom_s = [], [], [], []
    for r in summ.realizations:
        files.append(write_csv(prefix + f"ccdf_r{r.index:03d}.csv", ("x", "p"),
                               ccdf(r.community_sizes)))
        rates_c.append(over_expression_rate(over_expression(r.labels, country, alpha)))
        rates_s.append(over_expression_rate(over_expression(r.labels, sector, alpha)))
        dom = dominance_summary(profiles(g, r.labels, sectors), min_size)
        dom_c.append(dom["mean_share_c1"])
        dom_s.append(dom["mean_share_s1"])
    out = summ.as_dict()
    if summ.realizations:
        out["rewired_characterization"] = {
            "over_expression_rate_country": float(np.mean(rates_c)),
            "over_expression_rate_sector": float(np.mean(rates_s)),
            "mean_share_c1": _nanmean(dom_c),
            "mean_share_s1": _nanmean(dom_s),
        }
    files.append(write_json(prefix + "summary.json", out))
    return files


def _nanmean(x) -> float | None:
    x = np.asarray(x, dtype=float)
    x = x[~np.isnan(x)]
    return float(x.mean()) if len(x) else None


def _table3(report, ranked, sizes):
    rows = []
    for rank, c in enumerate(ranked.tolist(), 1):
        flagged = report.flagged_for(c)
        if flagged:
            text = " ".join(f"{v} ({k}/{K})" for v, k, K in flagged)
            rows.append((rank, c, int(sizes[c]), text))
    return rows


def write_characterize(g, labels, prefix: str, *, alpha: float = 0.01, min_size: int = 5,
                       attrs=("country", "sector"),
                       sectors: SectorMap = DEFAULT_SECTORS) -> list[Path]:
    labels = np.asarray(labels)
    profs = profiles(g, labels, sectors)
    cols = ("community_id", "n_firms", "herf_country", "share_c1", "c1", "c2",
            "herf_sector", "share_s1", "s1", "s2")
    files = [write_csv(prefix + "profiles.csv", cols, (p.as_row() for p in profs))]
    files.append(write_csv(
        prefix + "scatter.csv",
        ("community_id", "size", "share_s1", "share_c1", "region_color_key"),
        ((p.community, p.n_firms, p.share_s1, p.share_c1, region_key(p.c1 or "")) for p in profs),
    ))
    sizes = np.bincount(labels) if len(labels) else np.zeros(0, dtype=np.int64)
    ranked = ranked_communities(labels)
    ranked = ranked[sizes[ranked] >= min_size]
    summary = {"dominance": dominance_summary(profs, min_size)}
    for attr in attrs:
        rep = over_expression(labels, attribute_values(g, attr, sectors), alpha, attr)
        files.append(write_csv(prefix + f"overexpression_{attr}_pairs.csv",
                               ("community_id", "value", "k", "n", "K", "N", "p_value",
                                "over_expressed"), rep.rows()))
        files.append(write_csv(prefix + f"overexpression_{attr}.csv",
                               ("rank", "community_id", "n_firms", "over_expressed"),
                               _table3(rep, ranked, sizes)))
        flagged = set(rep.community[rep.over_expressed].tolist())
        summary[attr] = {
            "over_expression_rate": over_expression_rate(rep),
            "n_tests": rep.n_tests,
            "n_flagged": int(rep.over_expressed.sum()),
            "bonferroni_threshold": rep.threshold,
            "fraction_communities_with_flag": (
                sum(c in flagged for c in ranked.tolist()) / len(ranked) if len(ranked) else 0.0),
        }
    files.append(write_json(prefix + "summary.json", summary))
    return files


def write_aggregate(g, labels, prefix: str, *, top_k: int = 8, sector_filter="financial",
                    sectors: SectorMap = DEFAULT_SECTORS) -> list[Path]:
    labels = np.asarray(labels)
    t5 = community_table(g, labels, top_k, sector_filter, sectors)
    t5_cols = list(t5[0].keys()) if t5 else ["community_id", "rank", "n_firms", "n_rel", "density"]
    files = [write_csv(prefix + "table5.csv", t5_cols, t5)]
    top = ranked_communities(labels, top_k)
    keep = (sector_mask(g, sector_filter, sectors) if sector_filter
            else np.ones(g.n_nodes, dtype=bool))
    full = aggregate(g, labels, communities=top).dense()
    filt = aggregate(g.subgraph(keep), labels[keep], communities=top).dense()
    k = len(top)
    cols = ["start_rank", "start_id"]
    for j in range(k):
        cols += [f"end{j + 1}_with", f"end{j + 1}_without"]
    rows = []
    for i in range(k):
        row = [i + 1, int(top[i])]
        for j in range(k):
            row += [int(full[i, j]), int(filt[i, j])]
        rows.append(row)
    files.append(write_csv(prefix + "table6.csv", cols, rows))
    cn = aggregate(g, labels)
    coo = cn.counts.tocoo()
    order = np.lexsort((coo.col, coo.row))
    ids = cn.community_ids
    files.append(write_csv(
        prefix + "community_network.csv", ("source_id", "target_id", "count"),
        ((int(ids[coo.row[i]]), int(ids[coo.col[i]]), int(coo.data[i])) for i in order),
    ))
    kept_edges = int((keep[g.src] & keep[g.dst]).sum())
    files.append(write_json(prefix + "summary.json", {
        "n_communities": cn.n_communities,
        "sector_filter": sector_filter,
        "removed_nodes": int((~keep).sum()),
        "removed_edges": g.n_edges - kept_edges,
        "sector_cross_link_fraction": (cross_link_share(g, labels, sector_filter, sectors)
                                       if sector_filter else 0.0),
    }))
    return files


def _topology(dg, seed, sample) -> dict:
    bt = bow_tie(dg)
    return {
        "n_nodes": dg.n_nodes, "n_links": dg.n_edges,
        "isolated": int(((dg.in_degree + dg.out_degree) == 0).sum()),
        "bow_tie": bt.counts, "degree": degree_stats(dg),
        "shortest_paths": shortest_path_stats(dg, sample, seed),
        "density": link_density(dg) if dg.n_nodes >= 2 else None,
    }


def write_topology(g, labels, prefix: str, *, seed: int = 0, sample: int = 1000,
                   sector_filter="financial", sectors: SectorMap = DEFAULT_SECTORS) -> list[Path]:
    """Bow-tie, degree and path statistics of the community network, full and filtered."""
    labels = np.asarray(labels)
    communities = ranked_communities(labels)
    full = _topology(aggregate(g, labels, communities=communities).digraph(), seed, sample)
    keep = sector_mask(g, sector_filter, sectors)
    filt = _topology(aggregate(g.subgraph(keep), labels[keep], communities=communities).digraph(),
                     seed, sample)
    rel = {c: (filt["bow_tie"][c] - a) / a if a else 0.0 for c, a in full["bow_tie"].items()}
    return [write_json(prefix + "summary.json",
                       {"full": full, "filtered": filt, "sector_filter": sector_filter,
                        "bow_tie_relative_change": rel})]


DEBTRANK_COLUMNS = ("community_id", "R", "size", "country", "sector")


def write_debtrank(g, labels, prefix: str, *, top_k: int = 50, sector_filter=None,
                   beta: float | None = None, value: str = "size", cap: bool = True,
                   sectors: SectorMap = DEFAULT_SECTORS) -> list[Path]:
    """DebtRank CSV and radial layout; with ``sector_filter`` only the filtered variant."""
    rep = centrality_report(g, labels, top_k, sector_filter, beta, value, cap,
                            sectors=sectors)
    rows = rep["filtered"] if sector_filter else rep["full"]
    mean_r = float(np.mean([r["R"] for r in rows])) if rows else 0.0
    return [
        write_csv(prefix + "debtrank.csv", DEBTRANK_COLUMNS, rows),
        write_json(prefix + "layout.json", {
            "beta": rep["beta"], "top_k": rep["top_k"], "mean_R": mean_r,
            "sector_filter": rep.get("sector_filter"), "nodes": radial_layout(rows),
            "empty": [r["community_id"] for r in rows if r["empty"]],
            "degenerate": rep["degenerate"],
        }),
    ]


# ---------------------------------------------------------------------------
# pipeline stages

def _stage_extract(ctx: _Ctx):
    cfg = ctx.cfg
    ctx.use(cfg.nodes, cfg.edges)
    g = read_graph(cfg.nodes, cfg.edges, on_violation=cfg.on_violation)
    roots = None
    if cfg.roots:
        (rp,) = ctx.use(cfg.roots)
        roots = read_roots(rp)
    sub, found = extract(g, ExtractionConfig(cfg.tnc_threshold, roots))
    files = list(write_graph(sub, ctx.prefix("extract")))
    files.append(write_json(ctx.prefix("extract") + "summary.json", {
        "input_nodes": g.n_nodes, "input_edges": g.n_edges, "merged_edges": g.merged_edges,
        "n_roots": len(found), "n_nodes": sub.n_nodes, "n_edges": sub.n_edges,
    }))
    return files


def _stage_components(ctx: _Ctx):
    return write_components(ctx.graph(), ctx.prefix("components"))


def _stage_communities(ctx: _Ctx):
    return write_communities(ctx.lcc_graph(), derive_seed(ctx.cfg.seed, "communities"),
                             ctx.prefix("communities"), ctx.cfg.top_k_table)


def _stage_ensemble(ctx: _Ctx):
    cfg = ctx.cfg
    rc = RewireConfig(cfg.n_swaps_per_edge, cfg.n_realizations,
                      derive_seed(cfg.seed, "ensemble"), cfg.max_reject_streak)
    (stages,) = ctx.use(ctx.path("communities", "stages.csv"))
    return write_ensemble(ctx.lcc_graph(), rc, derive_seed(cfg.seed, "communities"),
                          ctx.prefix("ensemble"), alpha=cfg.alpha, min_size=cfg.min_size,
                          workers=cfg.workers, sectors=ctx.sectors,
                          empirical=read_stage_log(stages)[-1])


def _stage_characterize(ctx: _Ctx):
    g, labels = ctx.lcc_partition()
    return write_characterize(g, labels, ctx.prefix("characterize"), alpha=ctx.cfg.alpha,
                              min_size=ctx.cfg.min_size, sectors=ctx.sectors)


def _stage_aggregate(ctx: _Ctx):
    g, labels = ctx.lcc_partition()
    return write_aggregate(g, labels, ctx.prefix("aggregate"), top_k=ctx.cfg.top_k_table,
                           sector_filter=ctx.cfg.sector_filter, sectors=ctx.sectors)


def _stage_topology(ctx: _Ctx):
    g, labels = ctx.lcc_partition()
    return write_topology(g, labels, ctx.prefix("topology"),
                          seed=derive_seed(ctx.cfg.seed, "topology"), sample=ctx.cfg.path_sample,
                          sector_filter=ctx.cfg.sector_filter, sectors=ctx.sectors)


def _stage_debtrank(ctx: _Ctx, filtered: bool):
    cfg = ctx.cfg
    g, labels = ctx.lcc_partition()
    name = "debtrank_filtered" if filtered else "debtrank_full"
    return write_debtrank(g, labels, ctx.prefix(name), top_k=cfg.top_k_debtrank,
                          sector_filter=cfg.sector_filter if filtered else None, beta=cfg.beta,
                          value=cfg.value, sectors=ctx.sectors)


_STAGE_FUNCS = {
    "extract": _stage_extract,
    "components": _stage_components,
    "communities": _stage_communities,
    "ensemble": _stage_ensemble,
    "characterize": _stage_characterize,
    "aggregate": _stage_aggregate,
    "topology": _stage_topology,
    "debtrank_full": lambda ctx: _stage_debtrank(ctx, False),
    "debtrank_filtered": lambda ctx: _stage_debtrank(ctx, True),
}


def run_pipeline(cfg: PipelineConfig, stages=STAGES) -> RunManifest:
    """Run the stages in order and write ``manifest.json``.

    A failing stage stops the run; the manifest then names it and
    :class:`StageFailure` is raised.
    """
    cfg.validate()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(cfg.digest(), __version__, str(out))
    write_json(out / "config.json", {k: v for k, v in asdict(cfg).items()})
    for name in stages:
        run = StageRun(name)
        manifest.stages.append(run)
        ctx = _Ctx(cfg)
        t0 = time.perf_counter()
        try:
            written = _STAGE_FUNCS[name](ctx)
        except Exception as exc:
            run.wall_time = time.perf_counter() - t0
            run.status = "failed"
            run.error = f"{type(exc).__name__}: {exc}"
            manifest.status = "failed"
            manifest.failed_stage = name
            write_json(out / "manifest.json", manifest.as_dict())
            raise StageFailure(name, exc) from exc
        run.wall_time = time.perf_counter() - t0
        run.status = "ok"
        run.inputs = {_rel(p, out): file_digest(p) for p in dict.fromkeys(ctx.reads)}
        run.outputs = {_rel(p, out): file_digest(p) for p in written}
        logger.info("stage %s done in %.2fs", name, run.wall_time)
    manifest.status = "ok"
    write_json(out / "manifest.json", manifest.as_dict())
    return manifest


def _rel(p: Path, base: Path) -> str:
    p = Path(p)
    try:
        return str(p.resolve().relative_to(base.resolve()))
    except ValueError:
        return str(p)


def load_manifest(run_dir) -> dict:
    return read_json(Path(run_dir) / "manifest.json")
