"""Main entry point for `factorseg`."""

import sys
import traceback
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from simple_parsing import ArgumentParser

from factorseg.errors import ConfigError, FactorSegError, FormatError, ParseError
from factorseg.pipeline.command import Detect
from factorseg.reporting.command import Report
from factorseg.simulation.benchmark import Benchmark
from factorseg.simulation.command import Simulate
from factorseg.utils import pretty_error

# Errors caused by the user's input rather than by the data
USAGE_ERRORS = (ConfigError, FormatError, ParseError, OSError)


@dataclass
class Command:
    """Detect, simulate, benchmark or report on change-points in factor models."""

    command: Detect | Simulate | Benchmark | Report

    def execute(self):
        return self.command.execute()


def _raising_module(err: BaseException) -> str | None:
    """Name of the innermost factorseg module in the traceback of `err`."""
    frames = [
        f for f in traceback.extract_tb(err.__traceback__) if "factorseg" in f.filename
    ]
    return Path(frames[-1].filename).stem if frames else None


def run(argv: Sequence[str] | None = None) -> int:
    parser = ArgumentParser(add_help=False, add_config_path_arg=True)
    parser.add_arguments(Command, dest="run")
    args = parser.parse_args(argv)
    run: Command = args.run

    try:
        run.execute()
    except USAGE_ERRORS as err:
        print(pretty_error(str(err), _raising_module(err)), file=sys.stderr)
        return 2
    except FactorSegError as err:
        print(pretty_error(str(err), _raising_module(err)), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(run())
