from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

from simple_parsing.helpers import field

from ..errors import ConfigError, DimensionError, FormatError, InputError
from ..panel import Orientation, load_csv
from ..reporting.tables import write_tables
from ..reporting.visualize import print_summary
from ..run import Run
from .config import DetectConfig
from .detect import detect


@dataclass
class Detect(Run):
    """Detect change-points in a panel stored as CSV."""

    input: Path | None = field(default=None, alias=["-i"])
    """CSV file holding the panel."""

    rows_are_time: bool = field(default=False, alias=["--rows-are-time"])
    """Each CSV row is one time point instead of one series."""

    full_panel: bool = field(default=False, alias=["--full-panel"])
    """Add the cross-series rows to the transformed panels."""

    cap_auto: bool = field(default=False, alias=["--cap-auto"])
    """Cap eigenvectors with the data-driven constant."""

    no_capping: bool = field(default=False, alias=["--no-capping"])
    """Disable eigenvector capping, overriding the config file."""

    config: DetectConfig = field(default_factory=DetectConfig)

    @property
    def orientation(self) -> Orientation:
        return "rows-are-time" if self.rows_are_time else "rows-are-series"

    def effective_config(self) -> DetectConfig:
        """The pipeline config with the command-line switches applied."""
        cfg = self.config
        if self.full_panel:
            cfg = replace(cfg, wavelet=replace(cfg.wavelet, mode="full"))
        if self.cap_auto:
            cfg = replace(cfg, capping="auto")
        elif self.no_capping:
            cfg = replace(cfg, capping="disabled")
        return cfg

    def validate(self) -> None:
        if self.input is None:
            raise ConfigError("an input CSV is required (--input)")
        if self.cap_auto and self.no_capping:
            raise ConfigError("--cap-auto and --no-capping are mutually exclusive")
        if not self.input.is_file():
            raise FileNotFoundError(f"input file not found: {self.input}")

    def summary(self) -> dict[str, Any]:
        return dict(input=str(self.input), config=self.effective_config().to_dict())

    def apply(self, out_dir: Path) -> None:
        assert self.input is not None
        try:
            panel = load_csv(self.input, self.orientation)
        except (DimensionError, InputError) as err:
            # A file that cannot hold a panel is a usage error
            raise FormatError(str(err)) from err
        report = detect(
            panel, self.effective_config(), workers=self.num_workers, progress=True
        )
        report.config = dict(
            input=self.input.name, orientation=self.orientation, **report.config
        )

        report.save(out_dir / "report.json")
        write_tables(report, out_dir)
        print_summary(report)
