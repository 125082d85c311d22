"""Tidy CSV tables derived from a detection report, for plotting elsewhere."""

from pathlib import Path

import pandas as pd

from ..pipeline.report import DetectionReport


def changepoint_frame(report: DetectionReport) -> pd.DataFrame:
    rows = [
        dict(origin=points.origin, **point._asdict())
        for points in (report.common_points, report.idio_points)
        for point in points
    ]
    columns = ["origin", "location", "level", "node", "statistic", "threshold"]
    return pd.DataFrame.from_records(rows, columns=columns)


def cardinality_frame(report: DetectionReport) -> pd.DataFrame:
    """Number of common change-points per screened k."""
    inclusion = report.inclusion
    return pd.DataFrame(
        dict(
            k=list(report.cardinality),
            cardinality=list(report.cardinality.values()),
            included=[inclusion[k] for k in report.cardinality],
            selected=[k == report.k_star for k in report.cardinality],
        )
    )


def profile_frame(report: DetectionReport) -> pd.DataFrame:
    """The max-over-m Double CUSUM curve of every examined node, one row per b."""
    rows = []
    for points in (report.common_points, report.idio_points):
        for node in points.nodes:
            if node.profile is None:
                continue
            first_b = node.start + report.min_gap
            for offset, value in enumerate(node.profile.tolist()):
                rows.append(
                    dict(
                        origin=points.origin,
                        level=node.level,
                        node=node.node,
                        start=node.start,
                        end=node.end,
                        b=first_b + offset,
                        dc=value,
                    )
                )

    columns = ["origin", "level", "node", "start", "end", "b", "dc"]
    return pd.DataFrame.from_records(rows, columns=columns)


def segment_frame(report: DetectionReport) -> pd.DataFrame:
    columns = ["start", "end", "r_hat", "classification", "skipped"]
    return pd.DataFrame.from_records(
        [record._asdict() for record in report.segments], columns=columns
    )


def write_tables(report: DetectionReport, out_dir: Path) -> list[Path]:
    """Write every table as a CSV in `out_dir` and return the paths."""
    frames = {
        "changepoints": changepoint_frame(report),
        "cardinality": cardinality_frame(report),
        "dc_profiles": profile_frame(report),
        "segments": segment_frame(report),
        "kbc": report.kbc,
    }

    paths = []
    for name, df in frames.items():
        path = out_dir / f"{name}.csv"
        df.to_csv(path, index=False)
        paths.append(path)
    return paths
