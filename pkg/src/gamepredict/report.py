"""Render an Evaluation into CSV tables plus aligned plain-text mirrors.

Output is a pure function of the evaluation, config hash and seed: no timestamps, stable
row order, fixed float formatting. Two runs over the same inputs are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

from .analysis import AggregateTable, summarize
from .filters import SensitivityGrid
from .games import GameFamily
from .pipeline import CORE_FAMILIES, POOLED_VARIANT_FAMILIES, Evaluation
from .prompts import VARIANT_FAMILIES, get_variant

AGG_COLUMNS = ["wins_base", "wins_aligned", "ties", "n_valid", "n_filtered", "ratio",
               "binomial_p", "direction", "wilcoxon_p", "wilcoxon_direction"]


@dataclass
class Table:
    name: str
    title: str
    columns: list[str]
    rows: list[list[Any]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)


# -- formatting ------------------------------------------------------------

def csv_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def format_p(p: float | None) -> str:
    if p is None:
        return "-"
    if p < 1e-3:
        return f"{p:.2e}"
    return f"{p:.3g}"


def text_value(col: str, v: Any) -> str:
    if v is None:
        return "-"
    if isinstance(v, bool):
        return "yes" if v else "no"
    if isinstance(v, float):
        if col.endswith("_p") or col == "p_value":
            return format_p(v)
        return f"{v:.3f}"
    return str(v)


def ratio(wins_base: int, wins_aligned: int) -> str:
    """Majority-to-minority ratio labelled with the winning side, e.g. ``3.4:1 Al.``."""
    if wins_base == wins_aligned:
        return "1:1" if wins_base else "-"
    hi, lo, side = (wins_base, wins_aligned, "Base") if wins_base > wins_aligned else (wins_aligned, wins_base, "Al.")
    if lo == 0:
        return f"{hi}:0 {side}"
    return f"{hi / lo:.1f}:1 {side}"


def agg_cells(t: AggregateTable) -> list[Any]:
    return [t.wins_base, t.wins_aligned, t.ties, t.n_valid, t.n_filtered, ratio(t.wins_base, t.wins_aligned),
            t.binomial_p, t.direction, t.wilcoxon_p, t.wilcoxon_direction]


def render_csv(table: Table, config_hash: str, seed: int) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["config_hash", "seed", *table.columns])
    for row in table.rows:
        w.writerow([config_hash, seed, *(csv_value(v) for v in row)])
    return buf.getvalue()


def render_text(table: Table, config_hash: str, seed: int) -> str:
    cells = [[text_value(c, v) for c, v in zip(table.columns, row)] for row in table.rows]
    widths = [max([len(c)] + [len(r[i]) for r in cells]) for i, c in enumerate(table.columns)]
    lines = [table.title, f"config_hash={config_hash} seed={seed}", ""]
    lines.append("  ".join(c.ljust(w) for c, w in zip(table.columns, widths)).rstrip())
    lines.append("  ".join("-" * w for w in widths))
    for r in cells:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
    if table.notes:
        lines.append("")
        lines.extend(f"note: {n}" for n in table.notes)
    return "\n".join(lines) + "\n"


def grid_text(grid: SensitivityGrid, config_hash: str, seed: int) -> str:
    """Grid layout: rows are mass thresholds, columns min-corr thresholds; cells ``base:aligned (p)``."""
    def lvl(x):
        return "none" if x is None else f"{x:g}"
    header = ["mass \\ corr"] + [lvl(c) for c in grid.corr_levels]
    rows = []
    for m, row in zip(grid.mass_levels, grid.cells):
        rows.append([lvl(m)] + [f"{c.wins_base}:{c.wins_aligned} ({format_p(c.p_value)})" for c in row])
    widths = [max(len(header[i]), *(len(r[i]) for r in rows)) for i in range(len(header))]
    lines = [f"Threshold sensitivity ({grid.family}): wins base:aligned (one-sided binomial p)",
             f"config_hash={config_hash} seed={seed}", ""]
    lines.append("  ".join(h.ljust(w) for h, w in zip(header, widths)).rstrip())
    lines.append("  ".join("-" * w for w in widths))
    for r in rows:
        lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
    return "\n".join(lines) + "\n"


# -- tables ----------------------------------------------------------------

def per_pair_table(ev: Evaluation) -> Table:
    t = Table("per_pair", "Per-pair results (native format)",
              ["pair_id", "provider", "base_model", "aligned_model", "params_b", "family",
               "base_mass", "base_r", "aligned_mass", "aligned_r", "mass_pass", "corr_pass", "included", "winner"])
    rows = []
    for f in ev.families:
        for r in ev.main[f]:
            rows.append([r.pair.pair_id, r.pair.provider, r.pair.base_model_id, r.pair.aligned_model_id,
                         r.pair.param_count, r.family, r.base_mass, r.base_r, r.aligned_mass, r.aligned_r,
                         r.filter.mass_pass, r.filter.corr_pass, r.filter.included, r.winner])
    t.rows = sorted(rows, key=lambda row: (row[0], [f.value for f in GameFamily].index(row[5])))
    return t


def family_table(ev: Evaluation) -> Table:
    t = Table("family_summary", "Base vs aligned wins by game family", ["scope", *AGG_COLUMNS])
    for f in ev.families:
        t.rows.append([f.value, *agg_cells(summarize(f.value, ev.main[f]))])
    core = [r for f in ev.families if f in CORE_FAMILIES for r in ev.main[f]]
    if core:
        t.rows.append(["overall", *agg_cells(summarize("overall", core))])
        t.notes.append("overall pools " + ", ".join(f.value for f in CORE_FAMILIES if f in ev.families))
    return t


def crossing_table(ev: Evaluation) -> Table:
    t = Table("crossing_controls", "Prompt-format crossing controls", ["crossing", "family", *AGG_COLUMNS])
    for name, by_family in [("native", ev.main), *ev.crossings.items()]:
        for f in ev.families:
            if f in by_family:
                t.rows.append([name, f.value, *agg_cells(summarize(f.value, by_family[f]))])
    return t


def variant_table(ev: Evaluation) -> Table:
    t = Table("variants", "Prompt variants: wins per variant", ["variant", "cluster", "scope", *AGG_COLUMNS])
    baseline = {f: ev.main[f] for f in ev.families}
    for name, by_family in [("standard", baseline), *ev.variants.items()]:
        cluster = get_variant(name).cluster
        pooled = [r for f in POOLED_VARIANT_FAMILIES if f in by_family for r in by_family[f]]
        if pooled:
            t.rows.append([name, cluster, "pooled", *agg_cells(summarize("pooled", pooled))])
        for f in ev.families:
            if f in by_family and (name != "standard" or f in VARIANT_FAMILIES):
                t.rows.append([name, cluster, f.value, *agg_cells(summarize(f.value, by_family[f]))])
    t.notes.append("pooled = " + " + ".join(f.value for f in POOLED_VARIANT_FAMILIES))
    return t


def config_table(ev: Evaluation) -> Table:
    t = Table("config_robustness", "Wins by game configuration parameter",
              ["family", "parameter", "value", *AGG_COLUMNS])
    for f in ev.families:
        for param, groups in ev.config_splits.get(f, {}).items():
            for value, results in groups.items():
                t.rows.append([f.value, param, value, *agg_cells(summarize(value, results))])
    return t


def round_table(ev: Evaluation) -> Table:
    t = Table("round_splits", "Wins by round", ["family", "split", "subset", *AGG_COLUMNS])
    for f in ev.families:
        for split, groups in ev.round_splits.get(f, {}).items():
            for label, results in groups.items():
                t.rows.append([f.value, split, label, *agg_cells(summarize(label, results))])
    return t


def size_table(ev: Evaluation) -> Table:
    t = Table("size_bins", "Median (base r - aligned r) by model size, percentile bootstrap CI",
              ["scope", "bin", "n", "median", "ci_low", "ci_high"])
    for scope, bins in ev.size_bins.items():
        for b in bins:
            t.rows.append([scope, b.label, b.n, b.median, b.ci_low, b.ci_high])
    t.notes.extend(ev.notices)
    return t


def grid_table(grid: SensitivityGrid) -> Table:
    t = Table(f"sensitivity_{grid.family}", f"Threshold sensitivity ({grid.family})",
              ["mass_threshold", "corr_threshold", "wins_base", "wins_aligned", "ties", "n_included",
               "binomial_p", "direction"])
    for row in grid.cells:
        for c in row:
            t.rows.append([c.mass_level, c.corr_level, c.wins_base, c.wins_aligned, c.ties, c.n_included,
                           c.p_value, c.direction])
    return t


def oneshot_tables(ev: Evaluation) -> list[Table]:
    if GameFamily.MATRIX_ONESHOT not in ev.families:
        return []
    topo = Table("oneshot_topologies", "One-shot 2x2 games by topology",
                 ["topology", "wins_base", "wins_aligned", "ratio", "binomial_p"])
    for value, results in ev.config_splits[GameFamily.MATRIX_ONESHOT].get("topology", {}).items():
        a = summarize(value, results)
        topo.rows.append([value, a.wins_base, a.wins_aligned, ratio(a.wins_base, a.wins_aligned), a.binomial_p])
    topo.rows.sort(key=lambda r: r[0])
    a = summarize("per-pair", ev.main[GameFamily.MATRIX_ONESHOT])
    topo.rows.append(["per-pair", a.wins_base, a.wins_aligned, ratio(a.wins_base, a.wins_aligned), a.binomial_p])
    out = [topo]
    if ev.ne is not None:
        ne = ev.ne
        summary = Table("ne_alignment", "Equilibrium alignment of predictions (one-shot games)",
                        ["human_vs_ne_r", "mean_base_r", "mean_aligned_r", "closer_base", "closer_aligned",
                         "ties", "binomial_p", "direction", "skipped_games"])
        summary.rows.append([ne.human_vs_ne, ne.mean_base_r, ne.mean_aligned_r, ne.closer_base,
                             ne.closer_aligned, ne.ties, ne.binomial_p, ne.direction, len(ne.skipped_games)])
        pairs = Table("ne_alignment_pairs", "Per-pair correlation with the equilibrium prediction",
                      ["pair_id", "base_r", "aligned_r", "closer"])
        pairs.rows = [[r.pair_id, r.base_r, r.aligned_r, r.closer] for r in ne.rows]
        out += [summary, pairs]
    return out


def scatter_table(ev: Evaluation) -> Table:
    t = Table("scatter", "Per-pair correlations (scatter data)",
              ["family", "pair_id", "base_r", "aligned_r", "included", "shaded", "region"])
    for fam in [f.value for f in ev.families]:
        for p in ev.scatter.get(fam, []):
            t.rows.append([fam, p.pair_id, p.base_r, p.aligned_r, p.included, p.in_shaded_region, p.region])
    return t


def build_tables(ev: Evaluation) -> list[Table]:
    tables = [per_pair_table(ev), family_table(ev)]
    if ev.crossings:
        tables.append(crossing_table(ev))
    if ev.variants:
        tables.append(variant_table(ev))
    tables += [config_table(ev), round_table(ev), size_table(ev)]
    tables += oneshot_tables(ev)
    tables.append(scatter_table(ev))
    return tables


def write_bundle(ev: Evaluation, out_dir: str | Path, config_hash: str, seed: int) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def put(name: str, text: str) -> None:
        p = out / name
        p.write_text(text, encoding="utf-8")
        written.append(p)

    order = []
    for t in build_tables(ev):
        put(f"{t.name}.csv", render_csv(t, config_hash, seed))
        put(f"{t.name}.txt", render_text(t, config_hash, seed))
        order.append(t.name)
    for scope, grid in ev.grids.items():
        t = grid_table(grid)
        put(f"{t.name}.csv", render_csv(t, config_hash, seed))
        put(f"{t.name}.txt", grid_text(grid, config_hash, seed))
        order.append(t.name)
    manifest = {"config_hash": config_hash, "seed": seed, "tables": order}
    put("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return written


def write_grids(grids: dict[str, SensitivityGrid], out_dir: str | Path, config_hash: str, seed: int) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for grid in grids.values():
        t = grid_table(grid)
        for suffix, text in ((".csv", render_csv(t, config_hash, seed)), (".txt", grid_text(grid, config_hash, seed))):
            p = out / f"{t.name}{suffix}"
            p.write_text(text, encoding="utf-8")
            written.append(p)
    return written


def read_bundle_text(out_dir: str | Path, tables: Sequence[str] | None = None) -> str:
    """Concatenate the text mirrors of a written bundle in manifest order."""
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text(encoding="utf-8"))
    names = manifest["tables"] if not tables else [n for n in manifest["tables"] if n in tables]
    return "\n".join((out / f"{n}.txt").read_text(encoding="utf-8") for n in names)
