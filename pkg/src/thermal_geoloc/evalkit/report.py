"""
Report rendering: rich table, key=value file, histogram CSV and plot
"""

import csv
import logging
import math
from pathlib import Path
from typing import Optional, Sequence, Union

from rich.console import Console
from rich.table import Table

from ..utils.checkpoint import atomic_write_bytes
from .evaluate import EvalReport
from .metrics import Histogram


def _fmt(value: float) -> str:
    return "n/a" if math.isnan(value) else f"{value:.1f}"


def report_table(reports: Sequence[EvalReport], title: str = "Geo-localization") -> Table:
    """One row per ablation cell: R@N, R_d@N and L2^d columns"""
    table = Table(title=title)
    table.add_column("Cell", style="cyan")
    table.add_column("Split")
    ns = sorted({n for r in reports for n in r.r_at})
    priors = sorted({key for r in reports for key in r.r_prior_at}, key=lambda k: (k[0], k[1]))
    radii = sorted({d for r in reports for d in r.l2_prior})
    for n in ns:
        table.add_column(f"R@{n}", justify="right")
    for d, n in priors:
        table.add_column(f"R_{d:g}@{n}", justify="right")
    for d in radii:
        table.add_column(f"L2^{d:g} (m)", justify="right")
    table.add_column("Skipped", justify="right")

    for report in reports:
        row = [report.cell_name or "-", report.split or "-"]
        row += [_fmt(report.r_at.get(n, math.nan)) for n in ns]
        row += [_fmt(report.r_prior_at.get(key, math.nan)) for key in priors]
        row += [_fmt(report.l2_prior.get(d, math.nan)) for d in radii]
        row.append(str(report.skipped))
        table.add_row(*row)
    return table


def render_report(report: EvalReport, console: Optional[Console] = None) -> None:
    console = console or Console()
    console.print(report_table([report]))
    o = report.outcomes
    console.print(
        f"Outcomes: {o.success} localized, {o.offset_error} offset errors,"
        f" {o.failure} failures of {report.queries} queries"
    )
    console.print(
        f"Timing: {report.embed_ms_per_query:.2f} ms embedding,"
        f" {report.match_ms_per_query:.2f} ms matching per query"
    )


def write_report(report: EvalReport, path: Union[str, Path]) -> None:
    """Machine-readable key=value report"""
    lines = [f"{key}={value}" for key, value in report.as_flat_dict().items()]
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("utf-8"))
    logging.info(f"Report written to {path}")


def write_histogram_csv(histogram: Histogram, path: Union[str, Path]) -> None:
    """bin_start,bin_end,count rows; the overflow bin ends at inf"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["bin_start", "bin_end", "count"])
        for start, end, count in histogram.rows():
            writer.writerow([f"{start:g}", f"{end:g}", count])
    logging.info(f"Histogram written to {path}")


def plot_histogram(
    histogram: Histogram, path: Union[str, Path], title: str = "Top-1 position error"
) -> None:
    """Bar chart of the histogram, overflow drawn as a final labelled bar"""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = histogram.rows()
    labels = [f"{s:g}-{e:g}" if math.isfinite(e) else f">={s:g}" for s, e, _ in rows]
    fig, ax = plt.subplots(figsize=(8, 4))
    ax.bar(range(len(rows)), [count for _, _, count in rows], color="tab:blue")
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_xlabel("Error (m)")
    ax.set_ylabel("Queries")
    ax.set_title(title)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    logging.info(f"Histogram plot written to {path}")
