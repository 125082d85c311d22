"""MAX and AVG aggregations of high-dimensional CUSUMs, used as comparison tests."""

from typing import NamedTuple

from ..errors import LengthError
from ..segment import CusumMatrix, cusum
from ..wavelet import WaveletPanel


class BaselineStats(NamedTuple):
    max: float
    """max_b max_ℓ |Y^ℓ_{s,b,e}|."""
    avg: float
    """max_b N⁻¹ Σ_ℓ |Y^ℓ_{s,b,e}|."""
    max_location: int
    avg_location: int


def baseline_reducers(cusums: CusumMatrix, trim: int = 0) -> BaselineStats:
    """Point-wise maximum and average of the CUSUM moduli, maximised over b.

    The split-point range and the tie rule (smallest b) match `double_cusum`.
    """
    if cusums.rows == 0:
        raise LengthError("baseline reducers need at least one retained row")

    s, e = cusums.interval
    lo, hi = s + trim, e - 1 - trim
    if lo > hi:
        raise LengthError(f"trim {trim} leaves no split point in [{s}, {e}]")

    moduli = cusums.values[:, lo - s : hi - s + 1].abs()
    max_curve = moduli.amax(dim=0)
    avg_curve = moduli.mean(dim=0)
    max_b = int(max_curve.argmax().item())
    avg_b = int(avg_curve.argmax().item())
    return BaselineStats(
        max=max_curve[max_b].item(),
        avg=avg_curve[avg_b].item(),
        max_location=lo + max_b,
        avg_location=lo + avg_b,
    )


def max_statistic(panel: WaveletPanel, s: int, e: int, trim: int) -> float:
    cusums = cusum(panel, s, e)
    return baseline_reducers(cusums, trim).max if cusums.rows else 0.0


def avg_statistic(panel: WaveletPanel, s: int, e: int, trim: int) -> float:
    cusums = cusum(panel, s, e)
    return baseline_reducers(cusums, trim).avg if cusums.rows else 0.0
