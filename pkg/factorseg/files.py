"""Helper functions for dealing with files."""

import os
from datetime import datetime
from pathlib import Path

from .errors import ConfigError


def factorseg_dir() -> Path:
    """Return the directory where run outputs are stored."""
    env_dir = os.environ.get("FACTORSEG_DIR", None)
    if env_dir is None:
        log_dir = Path.home() / "factorseg-runs"
    else:
        log_dir = Path(env_dir)

    log_dir.mkdir(parents=True, exist_ok=True)
    return log_dir


def benchmark_dir() -> Path:
    """Return the directory where benchmark sweeps are stored."""
    return factorseg_dir() / "benchmarks"


def timestamped_dir(parent: Path, prefix: str = "") -> Path:
    """Create and return a fresh directory such as `detect-20240131-142501`."""
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    name = f"{prefix}-{stamp}" if prefix else stamp

    parent.mkdir(parents=True, exist_ok=True)
    out_dir, suffix = parent / name, 1
    while out_dir.exists():
        suffix += 1
        out_dir = parent / f"{name}-{suffix}"

    out_dir.mkdir(parents=True)
    return out_dir


def resolve_workers(requested: int) -> int:
    """Cap a requested worker count by FACTORSEG_THREADS when it is set."""
    workers = max(1, requested)
    env = os.environ.get("FACTORSEG_THREADS")
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise ConfigError(f"FACTORSEG_THREADS must be an integer, got {env!r}")
        workers = min(workers, max(1, cap))
    return workers
