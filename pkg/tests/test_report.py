import json
from pathlib import Path

import pandas as pd
import pytest
from rich.console import Console

from factorseg.bootstrap import SbConfig
from factorseg.errors import ConfigError
from factorseg.pipeline import DetectConfig, DetectionReport, detect
from factorseg.pipeline.report import _now
from factorseg.reporting import markdown_summary, print_summary, write_tables
from factorseg.simulation import ScenarioSpec, generate


@pytest.fixture(scope="module")
def report() -> DetectionReport:
    panel = generate(ScenarioSpec(scenario="S1", n=20, T=200, sigma=3.0)).panel
    cfg = DetectConfig(candidates=(4, 5), bootstrap=SbConfig(replicates=19))
    return detect(panel, cfg)


def test_json_layout(report: DetectionReport):
    body = report.to_dict()
    assert set(body) >= {
        "config",
        "screening",
        "k_star",
        "common_changepoints",
        "idio_changepoints",
        "segments",
        "kbc",
        "profiles",
    }
    assert body["screening"]["candidates"] == [4, 5]
    assert body["config"]["bootstrap"]["replicates"] == 19
    assert body["kbc"]["c_grid"] == [0.5, 0.6, 0.7, 0.8, 0.9, 0.95]

    # Plain JSON, no tensors left over
    json.dumps(body, allow_nan=False)


def test_save_and_load(report: DetectionReport, tmp_path: Path):
    report.save(tmp_path / "report.json")
    loaded = DetectionReport.load(tmp_path / "report.json")

    assert loaded.canonical() == report.canonical()
    assert loaded.created_at == report.created_at
    assert loaded.common_points.locations == report.common_points.locations


def test_tables(report: DetectionReport, tmp_path: Path):
    paths = write_tables(report, tmp_path)
    assert sorted(p.name for p in paths) == [
        "cardinality.csv",
        "changepoints.csv",
        "dc_profiles.csv",
        "kbc.csv",
        "segments.csv",
    ]

    cardinality = pd.read_csv(tmp_path / "cardinality.csv")
    assert cardinality["k"].tolist() == [4, 5]
    assert cardinality["selected"].sum() == 1

    profiles = pd.read_csv(tmp_path / "dc_profiles.csv")
    assert (profiles["b"] >= profiles["start"] + report.min_gap).all()
    assert (profiles["b"] <= profiles["end"] - 1 - report.min_gap).all()


def test_summaries(report: DetectionReport):
    text = markdown_summary(report)
    assert text.startswith("# Detection report")
    assert "## k_b(c)" in text
    assert f"k* = {report.k_star}" in text

    console = Console(record=True, width=120)
    print_summary(report, console)
    assert "Screening over k" in console.export_text()


def test_timestamp_follows_source_date_epoch(monkeypatch: pytest.MonkeyPatch):
    monkeypatch.setenv("SOURCE_DATE_EPOCH", "0")
    assert _now() == "1970-01-01T00:00:00+00:00"

    monkeypatch.setenv("SOURCE_DATE_EPOCH", "yesterday")
    with pytest.raises(ConfigError):
        _now()
