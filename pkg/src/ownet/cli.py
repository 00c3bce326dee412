"""``ownet`` command-line entry point.

Every subcommand accepts ``--config FILE`` (a JSON object); flags given on
the command line override its keys. Exit codes: 0 ok, 2 invalid input or
configuration, 3 a stage failed while running.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .characterize import SectorMap
from .extract import ExtractionConfig, extract
from .graph import GraphValidationError, OwnetError
from .io import (read_graph, read_membership, read_node_list, read_roots, write_csv,
                 write_graph, write_json)
from .nullmodel import RewireConfig, RewireError
from .pipeline import (ConfigError, PipelineConfig, StageFailure, run_pipeline, write_aggregate,
                       write_characterize, write_communities, write_debtrank, write_ensemble)
from .report import emit_report
from .synthetic import SyntheticSpec, generate_synthetic, planted_labels
from .topology import largest_weak_component

EXIT_OK, EXIT_VALIDATION, EXIT_STAGE = 0, 2, 3

logger = logging.getLogger("ownet")

# Defaults applied after the config file and the flags.
DEFAULTS = {
    "threshold": 0.10, "on_violation": "reject", "seed": 0, "realizations": 20,
    "swaps_per_edge": 10.0, "max_reject_streak": 10**5, "attr": "both", "alpha": 0.01,
    "min_size": 5, "top": None, "drop_sector": None, "beta": "auto", "value": "size",
    "whole_graph": False, "no_cap": False,
}


def _beta(text):
    if text is None or str(text) == "auto":
        return None
    try:
        b = float(text)
    except ValueError:
        raise ConfigError(f"--beta must be 'auto' or a number, got {text!r}") from None
    if b <= 0:
        raise ConfigError("--beta must be positive")
    return b


def _require(opts: dict, *keys):
    missing = [k for k in keys if opts.get(k) is None]
    if missing:
        raise ConfigError("missing required option(s): "
                          + ", ".join("--" + k.replace("_", "-") for k in missing))


def _load_graph(opts, lcc=True):
    _require(opts, "nodes", "edges")
    g = read_graph(opts["nodes"], opts["edges"], on_violation=opts["on_violation"])
    if opts.get("membership"):
        return g.subgraph(read_node_list(opts["membership"]))
    if lcc and not opts["whole_graph"]:
        return g.subgraph(largest_weak_component(g))
    return g


def _partition(opts):
    _require(opts, "membership")
    g = _load_graph(opts)
    _, labels = read_membership(opts["membership"], g.node_ids)
    return g, labels


def _report_written(files):
    for f in files:
        print(f)


def cmd_extract(opts):
    _require(opts, "nodes", "edges", "out")
    g = read_graph(opts["nodes"], opts["edges"], on_violation=opts["on_violation"])
    roots = read_roots(opts["roots"]) if opts.get("roots") else None
    sub, found = extract(g, ExtractionConfig(float(opts["threshold"]), roots))
    files = list(write_graph(sub, opts["out"]))
    files.append(write_json(opts["out"] + "extract.json", {
        "input_nodes": g.n_nodes, "input_edges": g.n_edges, "merged_edges": g.merged_edges,
        "n_roots": len(found), "n_nodes": sub.n_nodes, "n_edges": sub.n_edges,
    }))
    _report_written(files)


def cmd_synth(opts):
    _require(opts, "spec", "out")
    try:
        spec = SyntheticSpec.from_dict(json.loads(Path(opts["spec"]).read_text()))
    except FileNotFoundError:
        raise ConfigError(f"spec file not found: {opts['spec']}") from None
    except TypeError as exc:
        raise ConfigError(f"bad synthetic spec: {exc}") from None
    g = generate_synthetic(spec)
    files = list(write_graph(g, opts["out"]))
    files.append(write_csv(opts["out"] + "planted.csv", ("node_id", "block"),
                           zip(g.node_ids, planted_labels(spec).tolist())))
    _report_written(files)


def cmd_communities(opts):
    _require(opts, "out")
    g = _load_graph(opts)
    _report_written(write_communities(g, int(opts["seed"]), opts["out"], opts["top"] or 8))


def cmd_rewire(opts):
    _require(opts, "out")
    g = _load_graph(opts)
    rc = RewireConfig(float(opts["swaps_per_edge"]), int(opts["realizations"]),
                      int(opts["seed"]), int(opts["max_reject_streak"]))
    _report_written(write_ensemble(g, rc, int(opts.get("community_seed") or opts["seed"]),
                                   opts["out"], alpha=float(opts["alpha"]),
                                   min_size=int(opts["min_size"]), workers=opts.get("workers"),
                                   sectors=SectorMap.load(opts.get("sector_map"))))


def cmd_characterize(opts):
    _require(opts, "out")
    g, labels = _partition(opts)
    attrs = ("country", "sector") if opts["attr"] == "both" else (opts["attr"],)
    _report_written(write_characterize(g, labels, opts["out"], alpha=float(opts["alpha"]),
                                       min_size=int(opts["min_size"]), attrs=attrs,
                                       sectors=SectorMap.load(opts.get("sector_map"))))


def cmd_aggregate(opts):
    _require(opts, "out")
    g, labels = _partition(opts)
    _report_written(write_aggregate(g, labels, opts["out"], top_k=int(opts["top"] or 8),
                                    sector_filter=opts["drop_sector"] or "financial",
                                    sectors=SectorMap.load(opts.get("sector_map"))))


def cmd_debtrank(opts):
    _require(opts, "out")
    g, labels = _partition(opts)
    common = dict(top_k=int(opts["top"] or 50), beta=_beta(opts["beta"]), value=opts["value"],
                  cap=not opts["no_cap"], sectors=SectorMap.load(opts.get("sector_map")))
    files = write_debtrank(g, labels, opts["out"], **common)
    if opts["drop_sector"]:
        files += write_debtrank(g, labels, opts["out"] + "filtered_",
                                sector_filter=opts["drop_sector"], **common)
    _report_written(files)


_PIPELINE_FLAGS = {
    "nodes": "nodes", "edges": "edges", "seed": "seed", "out": "out_dir", "roots": "roots",
    "threshold": "tnc_threshold", "on_violation": "on_violation", "alpha": "alpha",
    "min_size": "min_size", "realizations": "n_realizations",
    "swaps_per_edge": "n_swaps_per_edge", "max_reject_streak": "max_reject_streak",
    "drop_sector": "sector_filter", "value": "value", "sector_map": "sector_map",
    "workers": "workers",
}


def cmd_pipeline(raw_config: dict, flags: dict):
    d = dict(raw_config)
    for flag, key in _PIPELINE_FLAGS.items():
        if flags.get(flag) is not None:
            d[key] = flags[flag]
    if flags.get("beta") is not None:
        d["beta"] = _beta(flags["beta"])
    if isinstance(d.get("beta"), str):
        d["beta"] = _beta(d["beta"])
    cfg = PipelineConfig.from_dict(d)
    manifest = run_pipeline(cfg)
    path = emit_report(cfg.out_dir)
    total = sum(s.wall_time for s in manifest.stages)
    print(f"{len(manifest.stages)} stages ok in {total:.1f}s; report at {path}")


def cmd_report(opts):
    _require(opts, "run")
    run = Path(opts["run"])
    if not (run / "config.json").is_file():
        raise ConfigError(f"not a pipeline run directory: {run}")
    print(emit_report(run, opts.get("out")))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ownet", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--config", help="JSON file with option defaults")
        return sp

    def graph_args(sp, membership=False):
        sp.add_argument("--nodes")
        sp.add_argument("--edges")
        sp.add_argument("--on-violation", choices=("reject", "clamp"))
        sp.add_argument("--whole-graph", action="store_true", default=None,
                        help="skip the restriction to the largest weak component")
        if membership:
            sp.add_argument("--membership", help="membership CSV from `ownet communities`")
        sp.add_argument("--sector-map")
        sp.add_argument("--out", help="output prefix")

    sp = add("extract", "snowball extraction around transnational firms")
    sp.add_argument("--nodes")
    sp.add_argument("--edges")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--roots")
    sp.add_argument("--on-violation", choices=("reject", "clamp"))
    sp.add_argument("--out", help="output prefix")

    sp = add("synth", "generate a planted-block ownership graph")
    sp.add_argument("--spec")
    sp.add_argument("--out", help="output prefix")

    sp = add("communities", "multi-level modularity optimisation")
    graph_args(sp)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--top", type=int, help="communities listed in the subcommunity table")

    sp = add("rewire", "compare with a constrained rewired ensemble")
    graph_args(sp)
    sp.add_argument("--realizations", type=int)
    sp.add_argument("--swaps-per-edge", type=float)
    sp.add_argument("--max-reject-streak", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--community-seed", type=int)
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--min-size", type=int)
    sp.add_argument("--workers", type=int)

    sp = add("characterize", "country and sector profiles of communities")
    graph_args(sp, membership=True)
    sp.add_argument("--attr", choices=("country", "sector", "both"))
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--min-size", type=int)

    sp = add("aggregate", "links between the largest communities")
    graph_args(sp, membership=True)
    sp.add_argument("--top", type=int)
    sp.add_argument("--drop-sector")

    sp = add("debtrank", "DebtRank centrality of the largest communities")
    graph_args(sp, membership=True)
    sp.add_argument("--top", type=int)
    sp.add_argument("--drop-sector")
    sp.add_argument("--beta", help="'auto' (number of communities) or a number")
    sp.add_argument("--value", choices=("size", "uniform"))
    sp.add_argument("--no-cap", action="store_true", default=None)

    sp = add("pipeline", "run every stage and write a report")
    sp.add_argument("--nodes")
    sp.add_argument("--edges")
    sp.add_argument("--roots")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", help="output directory")
    sp.add_argument("--threshold", type=float)
    sp.add_argument("--on-violation", choices=("reject", "clamp"))
    sp.add_argument("--alpha", type=float)
    sp.add_argument("--min-size", type=int)
    sp.add_argument("--realizations", type=int)
    sp.add_argument("--swaps-per-edge", type=float)
    sp.add_argument("--max-reject-streak", type=int)
    sp.add_argument("--drop-sector")
    sp.add_argument("--beta")
    sp.add_argument("--value", choices=("size", "uniform"))
    sp.add_argument("--sector-map")
    sp.add_argument("--workers", type=int)

    sp = add("report", "write report.md for a finished run")
    sp.add_argument("--run", help="pipeline output directory")
    sp.add_argument("--out", help="report path (default <run>/report.md)")
    return p


_COMMANDS = {
    "extract": cmd_extract, "synth": cmd_synth, "communities": cmd_communities,
    "rewire": cmd_rewire, "characterize": cmd_characterize, "aggregate": cmd_aggregate,
    "debtrank": cmd_debtrank, "report": cmd_report,
}


def _read_config(path) -> dict:
    if path is None:
        return {}
    try:
        d = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return d


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    flags = {k: v for k, v in vars(args).items()
             if k not in ("command", "config", "verbose") and v is not None}
    try:
        raw = _read_config(args.config)
        if args.command == "pipeline":
            cmd_pipeline(raw, flags)
        else:
            opts = {**DEFAULTS, **{k.replace("-", "_"): v for k, v in raw.items()}, **flags}
            _COMMANDS[args.command](opts)
    except StageFailure as exc:
        print(f"ownet: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (ConfigError, GraphValidationError, FileNotFoundError, ValueError) as exc:
        print(f"ownet: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (RewireError, OwnetError, np.linalg.LinAlgError) as exc:
        print(f"ownet: {args.command} failed: {exc}", file=sys.stderr)
        return EXIT_STAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
