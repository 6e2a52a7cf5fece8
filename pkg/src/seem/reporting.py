"""Table-shaped reports for the consolidation and graph statistics."""

from __future__ import annotations

from .episodic import ConsolidationStats
from .graph import GraphStats


def format_ratio(ratio: float | None) -> str:
    return "n/a" if ratio is None else f"{ratio:.2f}:1"


def consolidation_table(stats: ConsolidationStats) -> str:
    """Two-column layout: passages-per-memory buckets, then the totals block."""
    rows = [("Passages per Memory", "Number of Memory Frames")]
    for size in sorted(stats.histogram):
        rows.append((str(size), str(stats.histogram[size])))
    rows.append(("Total Memory Frames", str(stats.total_frames)))
    rows.append(("Total Passages", str(stats.total_passages)))
    rows.append(("Consolidation Ratio", format_ratio(stats.ratio)))
    width = max(len(r[0]) for r in rows)
    return "\n".join(f"{left.ljust(width)}  {right}" for left, right in rows) + "\n"


GML_METRICS = ("Entities", "Facts", "Temporal Anchors", "Synonymy Edges")


def _gml_values(stats: GraphStats) -> tuple[int, int, int, int]:
    return (stats.entities, stats.facts, stats.temporal_anchors, stats.synonymy_edges)


def gml_stats_dict(partitions: list[tuple[str, GraphStats]]) -> dict:
    """Metric-rows x partition-columns layout, with a trailing Average column."""
    labels = [label for label, _ in partitions]
    rows = {}
    for i, metric in enumerate(GML_METRICS):
        values = [_gml_values(stats)[i] for _, stats in partitions]
        average = sum(values) / len(values) if values else None
        rows[metric] = {"values": values, "average": average}
    return {"columns": labels + ["Average"], "rows": rows}


def gml_table(partitions: list[tuple[str, GraphStats]]) -> str:
    data = gml_stats_dict(partitions)
    header = ["Metric"] + data["columns"]
    body = []
    for metric in GML_METRICS:
        row = data["rows"][metric]
        cells = [metric] + [f"{v:,}" for v in row["values"]]
        cells.append("n/a" if row["average"] is None else f"{row['average']:,.1f}")
        body.append(cells)
    table = [header] + body
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
             for row in table]
    return "\n".join(lines) + "\n"
