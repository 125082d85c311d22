from .config import DetectConfig
from .detect import ComponentDetector, detect
from .report import DetectionReport, SegmentRecord
from .screening import ScreeningRange, screening_range
from .segments import (
    SegmentFit,
    classify_break,
    kbc_table,
    segment_analysis,
    segment_bounds,
)

__all__ = [
    "classify_break",
    "ComponentDetector",
    "detect",
    "DetectConfig",
    "DetectionReport",
    "kbc_table",
    "segment_analysis",
    "segment_bounds",
    "SegmentFit",
    "SegmentRecord",
    "screening_range",
    "ScreeningRange",
]
