from .detection import (
    RateResult,
    detection_rate_ci,
    exact_recovery,
    location_error,
    match_breaks,
)

__all__ = [
    "detection_rate_ci",
    "exact_recovery",
    "location_error",
    "match_breaks",
    "RateResult",
]
