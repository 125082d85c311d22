from .factor import FactorDecomposition, decompose
from .panel import TimeSeriesPanel, center, load_csv, save_csv
from .pipeline import DetectConfig, DetectionReport, detect
from .segment import ChangePointSet, dcbs, double_cusum
from .simulation import ScenarioSpec, generate
from .wavelet import WaveletPanel, build_panel

__all__ = [
    "build_panel",
    "center",
    "ChangePointSet",
    "dcbs",
    "decompose",
    "detect",
    "DetectConfig",
    "DetectionReport",
    "double_cusum",
    "FactorDecomposition",
    "generate",
    "load_csv",
    "save_csv",
    "ScenarioSpec",
    "TimeSeriesPanel",
    "WaveletPanel",
]
