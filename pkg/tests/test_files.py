from pathlib import Path

import pytest

from factorseg.errors import ConfigError
from factorseg.files import (
    benchmark_dir,
    factorseg_dir,
    resolve_workers,
    timestamped_dir,
)


def test_factorseg_dir_follows_env(tmp_path: Path, monkeypatch: pytest.MonkeyPatch):
    monkeypatch.setenv("FACTORSEG_DIR", str(tmp_path / "runs"))
    assert factorseg_dir() == tmp_path / "runs"
    assert (tmp_path / "runs").is_dir()
    assert benchmark_dir() == tmp_path / "runs" / "benchmarks"


def test_timestamped_dirs_are_fresh(tmp_path: Path):
    first = timestamped_dir(tmp_path, "detect")
    second = timestamped_dir(tmp_path, "detect")

    assert first != second
    assert first.is_dir() and second.is_dir()
    assert first.name.startswith("detect-")


def test_resolve_workers(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.delenv("FACTORSEG_THREADS", raising=False)
    assert resolve_workers(8) == 8
    assert resolve_workers(0) == 1

    monkeypatch.setenv("FACTORSEG_THREADS", "2")
    assert resolve_workers(8) == 2
    assert resolve_workers(1) == 1

    monkeypatch.setenv("FACTORSEG_THREADS", "many")
    with pytest.raises(ConfigError):
        resolve_workers(4)
