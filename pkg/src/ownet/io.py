"""CSV/JSON readers and writers with deterministic number formatting."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd

from .community import StageRecord
from .graph import UNKNOWN_COUNTRY, UNKNOWN_NACE, GraphValidationError, OwnershipGraph

NODE_COLUMNS = ("id", "country", "nace", "is_tnc", "operating_revenue")
EDGE_COLUMNS = ("source", "target", "share")

_TRUE = {"1", "true", "t", "yes", "y"}
_FALSE = {"0", "false", "f", "no", "n", ""}


def fmt(x) -> str:
    """12 significant digits for floats, plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (float, np.floating)):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return f"{float(x):.12g}"
    if isinstance(x, np.integer):
        return str(int(x))
    return "" if x is None else str(x)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            return fmt(x)
        return float(f"{x:.12g}")
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


def write_csv(path, columns: Sequence[str], rows: Iterable) -> Path:
    """Rows are dicts keyed by column or plain sequences in column order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(c) for c in columns]
            w.writerow([fmt(v) for v in row])
    return path


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _parse_bool(v) -> bool:
    s = str(v).strip().lower()
    if s in _TRUE:
        return True
    if s in _FALSE:
        return False
    raise GraphValidationError(f"cannot read {v!r} as a boolean")


def read_graph(nodes_path, edges_path, on_violation: str = "reject") -> OwnershipGraph:
    """Load the node and edge tables into a validated :class:`OwnershipGraph`."""
    for p in (nodes_path, edges_path):
        if not Path(p).is_file():
            raise FileNotFoundError(f"input file not found: {p}")
    nodes = pd.read_csv(nodes_path, dtype=str, keep_default_na=False, encoding="utf-8")
    edges = pd.read_csv(edges_path, dtype={"source": str, "target": str},
                        keep_default_na=False, encoding="utf-8")
    missing = [c for c in NODE_COLUMNS if c not in nodes.columns]
    if missing:
        raise GraphValidationError(f"{nodes_path}: missing columns {missing}")
    missing = [c for c in EDGE_COLUMNS if c not in edges.columns]
    if missing:
        raise GraphValidationError(f"{edges_path}: missing columns {missing}")

    ids = nodes["id"].tolist()
    country = [c.strip() or UNKNOWN_COUNTRY for c in nodes["country"]]
    nace = [int(x) if str(x).strip() else UNKNOWN_NACE for x in nodes["nace"]]
    is_tnc = [_parse_bool(x) for x in nodes["is_tnc"]]
    rev = nodes["operating_revenue"]
    revenue = pd.to_numeric(rev.mask(rev.str.strip() == "")).to_numpy(float)

    index = pd.Index(ids)
    if not index.is_unique:
        raise GraphValidationError(f"{nodes_path}: duplicate node ids")
    src = index.get_indexer(edges["source"])
    dst = index.get_indexer(edges["target"])
    if (src < 0).any() or (dst < 0).any():
        bad = edges["source"][src < 0].tolist() + edges["target"][dst < 0].tolist()
        raise GraphValidationError(f"{edges_path}: edge endpoint {bad[0]!r} is not a known node")
    share = pd.to_numeric(edges["share"]).to_numpy(float)
    return OwnershipGraph.from_arrays(ids, src, dst, share, on_violation=on_violation,
                                      country=country, nace=nace, is_tnc=is_tnc,
                                      operating_revenue=revenue)


def write_graph(g: OwnershipGraph, prefix) -> tuple[Path, Path]:
    """Write ``<prefix>nodes.csv`` and ``<prefix>edges.csv``."""
    prefix = str(prefix)
    ids = g.node_ids
    rev = g.operating_revenue
    node_rows = (
        (ids[i], g.country[i], int(g.nace[i]), bool(g.is_tnc[i]),
         None if np.isnan(rev[i]) else float(rev[i]))
        for i in range(g.n_nodes)
    )
    edge_rows = ((ids[s], ids[t], a) for s, t, a in
                 zip(g.src.tolist(), g.dst.tolist(), g.share.tolist()))
    return (write_csv(prefix + "nodes.csv", NODE_COLUMNS, node_rows),
            write_csv(prefix + "edges.csv", EDGE_COLUMNS, edge_rows))


def read_membership(path, node_ids=None) -> tuple[list[str], np.ndarray]:
    """Final-level community labels from a membership CSV, aligned to ``node_ids``."""
    df = pd.read_csv(path, dtype={"node_id": str}, keep_default_na=False)
    if "node_id" not in df.columns or "final_id" not in df.columns:
        raise GraphValidationError(f"{path}: needs node_id and final_id columns")
    labels = df["final_id"].to_numpy(np.int64)
    ids = df["node_id"].tolist()
    if node_ids is None:
        return ids, labels
    pos = pd.Index(ids).get_indexer(list(node_ids))
    if (pos < 0).any():
        missing = [v for v, p in zip(node_ids, pos) if p < 0]
        raise GraphValidationError(f"{path}: no community for node {missing[0]!r}")
    return list(node_ids), labels[pos]


def read_node_list(path) -> list[str]:
    """The ``node_id`` column of a CSV."""
    df = pd.read_csv(path, dtype={"node_id": str}, keep_default_na=False)
    if "node_id" not in df.columns:
        raise GraphValidationError(f"{path}: needs a node_id column")
    return df["node_id"].tolist()


def read_roots(path) -> tuple[str, ...]:
    """One node id per line; blank lines are skipped."""
    text = Path(path).read_text(encoding="utf-8")
    return tuple(x.strip() for x in text.splitlines() if x.strip())


def read_stage_log(path) -> list:
    """Rows of a ``level,n_nodes,n_links,modularity`` CSV as stage records."""
    df = pd.read_csv(path)
    return [StageRecord(int(r.level), int(r.n_nodes), int(r.n_links), float(r.modularity))
            for r in df.itertuples()]
