from typing import Iterable, Sequence

import pandas as pd
from rich.console import Console
from rich.table import Table

from ..pipeline.report import DetectionReport
from ..utils import format_points


def _cell(value) -> str:
    if value is None or (isinstance(value, float) and pd.isna(value)):
        return "-"
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def render_table(
    title: str, columns: Sequence[str], rows: Iterable[Sequence]
) -> Table:
    table = Table(
        title=title, show_header=True, header_style="bold magenta", show_lines=True
    )
    for column in columns:
        table.add_column(column)
    for row in rows:
        table.add_row(*map(_cell, row))
    return table


def summary_tables(report: DetectionReport) -> list[Table]:
    screening = render_table(
        "Screening over k",
        ["k", "change-points", "included in k*"],
        [
            (f"{k}*" if k == report.k_star else k, format_points(p.locations), inc)
            for (k, p), inc in zip(report.per_k.items(), report.inclusion.values())
        ],
    )
    points = render_table(
        "Change-points",
        ["origin", "location", "level", "statistic", "threshold"],
        [
            (s.origin, p.location, p.level, p.statistic, p.threshold)
            for s in (report.common_points, report.idio_points)
            for p in s
        ],
    )
    segments = render_table(
        "Segments",
        ["start", "end", "r_hat", "break type"],
        [(r.start, r.end, r.r_hat, r.classification) for r in report.segments],
    )
    kbc = render_table(
        "k_b(c)",
        list(map(str, report.kbc.columns)),
        report.kbc.itertuples(index=False),
    )
    return [screening, points, segments, kbc]


def print_summary(report: DetectionReport, console: Console | None = None) -> None:
    console = console or Console()
    for table in summary_tables(report):
        console.print(table)


def markdown_summary(report: DetectionReport) -> str:
    """The summary tables as Markdown."""

    def md_table(df: pd.DataFrame) -> str:
        header = "| " + " | ".join(map(str, df.columns)) + " |"
        rule = "|" + "---|" * len(df.columns)
        body = [
            "| " + " | ".join(_cell(v) for v in row) + " |"
            for row in df.itertuples(index=False)
        ]
        return "\n".join([header, rule, *body])

    screening = pd.DataFrame(
        dict(
            k=list(report.per_k),
            change_points=[format_points(p.locations) for p in report.per_k.values()],
            included=list(report.inclusion.values()),
        )
    )
    points = pd.DataFrame.from_records(
        [
            dict(origin=s.origin, **p._asdict())
            for s in (report.common_points, report.idio_points)
            for p in s
        ],
        columns=["origin", "location", "level", "node", "statistic", "threshold"],
    )
    segments = pd.DataFrame.from_records(
        [r._asdict() for r in report.segments],
        columns=["start", "end", "r_hat", "classification", "skipped"],
    )

    sections = [
        "# Detection report",
        f"n = {report.n}, T = {report.T}, J* = {report.J_star}, "
        f"d_T = {report.d_T}, k* = {report.k_star}",
        "## Screening",
        md_table(screening),
        "## Change-points",
        md_table(points),
        "## Segments",
        md_table(segments),
        "## k_b(c)",
        md_table(report.kbc),
    ]
    return "\n\n".join(sections) + "\n"
