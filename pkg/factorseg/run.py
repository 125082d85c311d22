from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from simple_parsing.helpers import Serializable, field
from simple_parsing.helpers.serialization import save

from .debug_logging import save_debug_log
from .files import factorseg_dir, resolve_workers, timestamped_dir
from .utils import bold


@dataclass
class Run(ABC, Serializable):
    out_dir: Path | None = field(default=None, alias=["--out"])
    """Directory to save results to. If None, a directory will be created
    automatically under FACTORSEG_DIR."""

    workers: int = field(default=1, to_dict=False)
    """Number of worker processes. Capped by FACTORSEG_THREADS when set."""

    debug: bool = field(default=False, to_dict=False)
    """Write every log record to debug.log in the output directory."""

    def execute(self):
        self.validate()

        if self.out_dir is None:
            self.out_dir = timestamped_dir(self.runs_dir, self.kind)

        # Print the output directory in bold with escape codes
        print(f"Output directory at {bold(str(self.out_dir))}")
        self.out_dir.mkdir(parents=True, exist_ok=True)

        # save_dc_types is needed to load nested configs back
        save(self, self.out_dir / "cfg.yaml", save_dc_types=True)
        if self.debug:
            save_debug_log(self.out_dir, self.summary())

        self.apply(self.out_dir)

    @property
    def num_workers(self) -> int:
        return resolve_workers(self.workers)

    @property
    def kind(self) -> str:
        return type(self).__name__.lower()

    @property
    def runs_dir(self) -> Path:
        """Parent of automatically named output directories."""
        return factorseg_dir() / self.kind

    def validate(self) -> None:
        """Check inputs before any output is written."""

    def summary(self) -> dict[str, Any]:
        return self.to_dict()

    @abstractmethod
    def apply(self, out_dir: Path) -> None:
        """Do the work of the command, writing results to `out_dir`."""
