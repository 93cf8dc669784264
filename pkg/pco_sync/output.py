"""Writers for JSON reports, CSV tables and text grid tables.

Nothing time-dependent is written, so identical inputs give identical files.
"""

from __future__ import annotations

import csv
import json
import logging
from pathlib import Path
from typing import Any, Optional, Sequence

from .experiments import ExperimentReport
from .utils import ensure_output_dir, save_json, to_jsonable

logger = logging.getLogger(__name__)


def write_json(data: dict[str, Any], filepath: Path) -> Path:
    """Write a JSON document, creating the parent directory."""
    ensure_output_dir(filepath.parent)
    save_json(data, filepath)
    logger.info(f"Wrote {filepath}")
    return filepath


def config_comment(config: dict[str, Any]) -> str:
    return "# config: " + json.dumps(to_jsonable(config), sort_keys=True)


def write_csv(
    header: Sequence[str],
    rows: Sequence[Sequence[Any]],
    filepath: Path,
    config: Optional[dict[str, Any]] = None,
) -> Path:
    """Write a CSV file, preceded by a '# config:' line when a config is given."""
    ensure_output_dir(filepath.parent)
    with open(filepath, "w", encoding="utf-8", newline="") as f:
        if config is not None:
            f.write(config_comment(config) + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in to_jsonable(list(row))])
    logger.info(f"Wrote {filepath}")
    return filepath


CELL_HEADER = [
    "row_param",
    "row_value",
    "col_param",
    "col_value",
    "runs",
    "converged_fraction",
    "mean_sync_time",
    "std_sync_time",
    "mean_energy",
    "mean_rate",
    "failed_count",
    "stalled_count",
    "unsettled_count",
    "guaranteed_unsynchronized",
]


def cell_rows(report: ExperimentReport) -> list[list[Any]]:
    """One CSV row per grid cell."""
    return [
        [
            report.row_param,
            c.row_value,
            report.col_param,
            c.col_value,
            c.runs,
            c.converged_fraction,
            c.mean_sync_time,
            c.std_sync_time,
            c.mean_energy,
            c.mean_rate,
            c.failed_count,
            c.stalled_count,
            c.unsettled_count,
            c.guaranteed_unsynchronized,
        ]
        for c in report.cells
    ]


def _format_value(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:g}"


def format_grid_table(report: ExperimentReport) -> str:
    """Render the grid as text: rows by row value, columns by column value.

    Each cell shows mean sync time [s] and mean energy [J], or "no sync"
    when no run converged; a partly converged cell also shows the fraction.
    A "*" marks cells where runs that alpha1 guarantees did not synchronize.
    """
    n_rows, n_cols = report.shape
    corner = f"{report.row_param or '-'} \\ {report.col_param or '-'}"
    header = [corner] + [_format_value(report.cell(0, j).col_value) for j in range(n_cols)]

    table = [header]
    for i in range(n_rows):
        line = [_format_value(report.cell(i, 0).row_value)]
        for j in range(n_cols):
            c = report.cell(i, j)
            if c.converged_count == 0:
                text = "no sync"
            else:
                text = f"{c.mean_sync_time:.1f} s / {c.mean_energy:.3e} J"
                if c.converged_count < c.runs:
                    text += f" ({c.converged_fraction:.0%})"
            if c.guaranteed_unsynchronized:
                text += " *"
            line.append(text)
        table.append(line)

    widths = [max(len(row[k]) for row in table) for k in range(len(header))]
    lines = []
    for n, row in enumerate(table):
        lines.append(" | ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
        if n == 0:
            lines.append("-+-".join("-" * w for w in widths))
    if any(c.guaranteed_unsynchronized for c in report.cells):
        lines.append("* guaranteed runs left unsynchronized at t_max")
    return "\n".join(lines) + "\n"
