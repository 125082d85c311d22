from dataclasses import dataclass
from pathlib import Path
from typing import Literal

from rich.console import Console
from simple_parsing import field

from ..pipeline.report import DetectionReport
from ..utils import bold
from .tables import write_tables
from .visualize import markdown_summary, print_summary


@dataclass
class Report:
    """Render a saved detection report."""

    report: Path = field(alias=["--in"])
    """The report.json written by `detect`."""

    format: Literal["csv", "md"] = "md"
    """`md` prints tables and writes report.md; `csv` writes the tidy CSV tables."""

    out_dir: Path | None = field(default=None, alias=["--out"])
    """Where to write; defaults to the directory of the report."""

    def execute(self):
        if not self.report.is_file():
            raise FileNotFoundError(f"report not found: {self.report}")

        report = DetectionReport.load(self.report)
        out_dir = self.out_dir or self.report.parent
        out_dir.mkdir(parents=True, exist_ok=True)

        if self.format == "csv":
            paths = write_tables(report, out_dir)
            print(f"Wrote {len(paths)} tables to {bold(str(out_dir))}")
            return

        print_summary(report, Console())
        path = out_dir / "report.md"
        path.write_text(markdown_summary(report))
        print(f"Wrote {bold(str(path))}")
