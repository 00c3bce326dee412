"""Markdown summary of a finished pipeline run, built only from its output files."""

from __future__ import annotations

import csv
from pathlib import Path

from .io import read_json


def _csv(path: Path) -> list[dict]:
    if not path.is_file():
        return []
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _num(x, digits: int = 4) -> str:
    if x is None or x == "":
        return "-"
    try:
        v = float(x)
    except (TypeError, ValueError):
        return str(x)
    if v.is_integer() and abs(v) < 1e15:
        return str(int(v))
    return f"{v:.{digits}g}"


def _table(header, rows) -> list[str]:
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(_num(c) for c in row) + " |" for row in rows]
    return lines + [""]


def emit_report(run_dir, out_path=None) -> Path:
    """Write ``report.md`` for the run in ``run_dir`` and return its path.

    The text depends only on the run's files (no timestamps), so emitting
    twice gives identical bytes.
    """
    run = Path(run_dir)
    cfg = read_json(run / "config.json")
    manifest = read_json(run / "manifest.json") if (run / "manifest.json").is_file() else {}
    min_size = int(cfg.get("min_size", 5))
    top = int(cfg.get("top_k_table", 8))
    out = ["# Ownership network community analysis", ""]
    if manifest:
        out += [f"Config hash `{manifest['config_hash']}`, toolkit version {manifest['version']}, "
                f"status {manifest['status']}.", ""]
        if manifest.get("failed_stage"):
            out += [f"The run stopped at stage `{manifest['failed_stage']}`; "
                    "sections below cover completed stages only.", ""]

    ex = run / "extract" / "summary.json"
    if ex.is_file():
        e = read_json(ex)
        out += ["## Extraction", "",
                f"{e['n_roots']} root firms; the closure holds {e['n_nodes']} firms and "
                f"{e['n_edges']} ownership links (input: {e['input_nodes']} firms, "
                f"{e['input_edges']} links, {e['merged_edges']} parallel links merged).", ""]

    comp = run / "components" / "summary.json"
    if comp.is_file():
        c = read_json(comp)
        out += ["## Connected components", "",
                f"{c['n_components']} weakly connected components. The largest holds "
                f"{c['lcc_size']} firms ({_num(100 * c['lcc_fraction'], 3)}%), the second "
                f"{c['second_size']}. Share of components below 10 firms: "
                f"{_num(c['fraction_below_10'], 3)}.", ""]
        fit = c.get("power_law_excluding_lcc")
        if fit and "exponent" in fit:
            out += [f"Power-law fit of the remaining component sizes: alpha = "
                    f"{_num(fit['exponent'])} (xmin = {fit['xmin']}, {fit['n_tail']} components, "
                    f"{fit['method']} estimator).", ""]
        out += ["Figure 1 (left) data: `components/ccdf.csv`.", ""]

    stages = _csv(run / "communities" / "stages.csv")
    if stages:
        out += ["## Table 1: Louvain stages", ""]
        out += _table(["level", "n_nodes", "n_links", "modularity"],
                      [[r["level"], r["n_nodes"], r["n_links"], r["modularity"]] for r in stages])

    ens = run / "ensemble" / "summary.json"
    if ens.is_file():
        s = read_json(ens)
        rc = s.get("rewired_characterization", {})
        en = s["ensemble"]
        out += ["## Rewired ensemble", "",
                *_table(["quantity", "empirical", "rewired mean", "rewired std"], [
                    ["modularity", s["empirical"]["modularity"], en["modularity_mean"], en["modularity_std"]],
                    ["communities", s["empirical"]["n_communities"], en["n_communities_mean"], en["n_communities_std"]],
                    ["links between communities", s["empirical"]["n_links_between"],
                     en["n_links_between_mean"], en["n_links_between_std"]],
                ]),
                f"z-score of the empirical modularity: {_num(s['z_score'])} over "
                f"{s['n_realizations']} realizations.", ""]
        if rc:
            out += [f"Rewired over-expression rate: country {_num(rc['over_expression_rate_country'])}, "
                    f"sector {_num(rc['over_expression_rate_sector'])}.", ""]
        out += ["Figure 1 (right) data: `communities/ccdf.csv` (empirical) and "
                "`ensemble/ccdf_r*.csv` (rewired).", ""]

    profs = [r for r in _csv(run / "characterize" / "profiles.csv") if int(r["n_firms"]) >= min_size]
    if (run / "characterize" / "profiles.csv").is_file():
        if not profs:
            out += ["## No communities ≥ min size", "",
                    f"No community has at least {min_size} firms, so Tables 2 to 6 are empty.", ""]
        else:
            out += [f"## Table 2: top {min(top, len(profs))} communities", ""]
            out += _table(["community", "firms", "H country", "c1 share", "c1", "c2",
                           "H sector", "s1 share", "s1", "s2"],
                          [[r["community_id"], r["n_firms"], r["herf_country"], r["share_c1"],
                            r["c1"], r["c2"], r["herf_sector"], r["share_s1"], r["s1"], r["s2"]]
                           for r in profs[:top]])
            summ = read_json(run / "characterize" / "summary.json")
            dom = summ["dominance"]
            out += [f"Across {dom['n_communities']} communities with at least {min_size} firms "
                    f"the dominant country holds {_num(dom['mean_share_c1'])} and the dominant "
                    f"sector {_num(dom['mean_share_s1'])} of members on average.", ""]
            for attr in ("country", "sector"):
                rows = _csv(run / "characterize" / f"overexpression_{attr}.csv")[:top]
                a = summ[attr]
                out += [f"## Table 3: over-expressed {attr} values", "",
                        f"{a['n_flagged']} of {a['n_tests']} tests significant at the Bonferroni "
                        f"threshold {_num(a['bonferroni_threshold'])}.", ""]
                out += _table(["rank", "community", "firms", "over-expressed (k/K)"],
                              [[r["rank"], r["community_id"], r["n_firms"], r["over_expressed"]]
                               for r in rows]) if rows else ["None.", ""]
            out += ["Figure 2 data: `characterize/scatter.csv`.", ""]

            sub = _csv(run / "communities" / "subcommunities.csv")
            out += ["## Table 4: subcommunities", ""]
            out += _table(["rank", "community", "firms", "subcommunities", "H of sizes"],
                          [[r["rank"], r["community_id"], r["n_firms"], r["n_subcomm"],
                            r["herf_subcomm_size"]] for r in sub])

            t5 = _csv(run / "aggregate" / "table5.csv")
            if t5:
                filt = "filtered_n_firms" in t5[0]
                head = ["rank", "community", "firms", "relations", "density"]
                if filt:
                    head += ["firms (filtered)", "relations (filtered)", "density (filtered)"]
                rows = []
                for r in t5:
                    row = [r["rank"], r["community_id"], r["n_firms"], r["n_rel"], r["density"]]
                    if filt:
                        row += [r["filtered_n_firms"], r["filtered_n_rel"], r["filtered_density"]]
                    rows.append(row)
                out += ["## Table 5: size and internal density", ""] + _table(head, rows)

            t6 = _csv(run / "aggregate" / "table6.csv")
            if t6:
                k = len(t6)
                out += [f"## Table 6: links between the top {k} communities", "",
                        "Each cell shows all links, then in parentheses the links left after "
                        f"removing the {cfg.get('sector_filter')} sector.", ""]
                out += _table(["start \\ end"] + [str(j + 1) for j in range(k)],
                              [[r["start_rank"]] + [f"{r[f'end{j + 1}_with']} ({r[f'end{j + 1}_without']})"
                                                    for j in range(k)] for r in t6])

    topo = run / "topology" / "summary.json"
    if topo.is_file():
        t = read_json(topo)
        rows = []
        for key in ("n_nodes", "n_links", "isolated", "density"):
            rows.append([key, t["full"][key], t["filtered"][key]])
        for key in ("LSCC", "IN", "OUT", "OTHER"):
            rows.append([f"bow-tie {key}", t["full"]["bow_tie"][key], t["filtered"]["bow_tie"][key]])
        for key in ("max", "mean", "std"):
            rows.append([f"path length {key}", t["full"]["shortest_paths"][key],
                         t["filtered"]["shortest_paths"][key]])
        out += ["## Community network topology", ""]
        out += _table(["quantity", "full", f"without {t['sector_filter']}"], rows)

    dr = [(name, run / name) for name in ("debtrank_full", "debtrank_filtered")]
    if any((d / "debtrank.csv").is_file() for _, d in dr):
        out += ["## DebtRank of the top communities", ""]
        for name, d in dr:
            rows = _csv(d / "debtrank.csv")
            if not rows:
                continue
            lay = read_json(d / "layout.json")
            label = "full network" if name == "debtrank_full" else f"without {lay['sector_filter']}"
            ranked = sorted(rows, key=lambda r: -float(r["R"]))[:10]
            out += [f"### {label}", "",
                    f"beta = {_num(lay['beta'])}, mean R = {_num(lay['mean_R'])}.", ""]
            out += _table(["community", "R", "firms", "country", "sector"],
                          [[r["community_id"], r["R"], r["size"], r["country"] or "-",
                            r["sector"] or "-"] for r in ranked])
        out += ["Figure 4 data: `debtrank_full/layout.json` and `debtrank_filtered/layout.json`.", ""]

    path = Path(out_path) if out_path else run / "report.md"
    path.write_text("\n".join(out).rstrip("\n") + "\n", encoding="utf-8")
    return path
