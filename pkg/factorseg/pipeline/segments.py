"""Factor analysis on the segments between common-component change-points."""

import logging
import warnings
from dataclasses import dataclass
from typing import Iterable, Literal, Sequence

import pandas as pd
import torch

from ..errors import LengthError
from ..factor import (
    FactorDecomposition,
    bai_ng_factor_number,
    decompose,
    max_factor_number,
    sample_covariance,
)
from ..panel import TimeSeriesPanel

BreakClass = Literal["loading_or_number_break", "autocorrelation_only"]


@dataclass(frozen=True)
class SegmentFit:
    start: int
    end: int
    r_hat: int | None
    """Estimated factor number; None when the segment was skipped."""
    decomposition: FactorDecomposition | None = None
    skipped: str | None = None
    """Reason the segment was not analysed."""

    @property
    def length(self) -> int:
        return self.end - self.start + 1


def segment_bounds(locations: Iterable[int], T: int) -> list[tuple[int, int]]:
    """[1, η₁], [η₁ + 1, η₂], ..., [η_B + 1, T]."""
    cuts = sorted(locations)
    starts = [1] + [eta + 1 for eta in cuts]
    ends = cuts + [T]
    return list(zip(starts, ends))


def _segment_r_max(panel: TimeSeriesPanel, r_max: int | None) -> int:
    return r_max if r_max is not None else max_factor_number(panel.n, panel.T)


def _segment_factor_number(
    panel: TimeSeriesPanel, interval: tuple[int, int], r_max: int, exponent: float
) -> int:
    s, e = interval
    if e - s + 1 < r_max + 2:
        raise LengthError(
            f"segment [{s}, {e}] is shorter than r_max + 2 = {r_max + 2} points"
        )
    return bai_ng_factor_number(panel, interval, r_max, "segment", exponent)


def segment_analysis(
    panel: TimeSeriesPanel,
    locations: Sequence[int],
    *,
    r_max: int | None = None,
    exponent: float = 2.0,
) -> list[SegmentFit]:
    """Estimate the factor number and the common component of every segment.

    Segments shorter than r_max + 2 are skipped with a warning and recorded as such.

    Args:
        panel: Centered panel.
        locations: Common-component change-points.
        r_max: Largest factor number tried per segment; defaults to the screening
            upper bound of the whole panel.
        exponent: Exponent a of the segment penalty.
    """
    r_max = _segment_r_max(panel, r_max)

    fits = []
    for s, e in segment_bounds(locations, panel.T):
        try:
            r_hat = _segment_factor_number(panel, (s, e), r_max, exponent)
        except LengthError as err:
            warnings.warn(f"Skipping segment: {err}")
            fits.append(SegmentFit(s, e, None, skipped=str(err)))
            continue

        decomp = decompose(panel, r_hat, interval=(s, e))
        logging.info(f"Segment [{s}, {e}]: r_hat={r_hat}")
        fits.append(SegmentFit(s, e, r_hat, decomp))

    return fits


def classify_break(
    panel: TimeSeriesPanel,
    left_segment: tuple[int, int],
    right_segment: tuple[int, int],
    *,
    r_max: int | None = None,
    exponent: float = 2.0,
) -> BreakClass:
    """Compare the factor numbers of two adjacent segments and of their union.

    A break in the loadings or in the number of factors raises the factor number of
    the pooled segment, so three equal estimates point to a change in the factor
    autocorrelations only.

    Raises:
        LengthError: If a segment is shorter than r_max + 2.
        ValueError: If the segments are not adjacent.
    """
    (s1, e1), (s2, e2) = left_segment, right_segment
    if s2 != e1 + 1:
        raise ValueError(f"segments [{s1}, {e1}] and [{s2}, {e2}] are not adjacent")

    r_max = _segment_r_max(panel, r_max)
    left = _segment_factor_number(panel, left_segment, r_max, exponent)
    right = _segment_factor_number(panel, right_segment, r_max, exponent)
    pooled = _segment_factor_number(panel, (s1, e2), r_max, exponent)

    logging.debug(f"Break at {e1}: r_left={left}, r_right={right}, r_pooled={pooled}")
    if left == right == pooled:
        return "autocorrelation_only"
    return "loading_or_number_break"


def kbc_row(
    panel: TimeSeriesPanel, interval: tuple[int, int], c_grid: Sequence[float]
) -> list[int | None]:
    """k_b(c) for one segment: the smallest k whose leading eigenvalues explain more
    than a fraction c of the first q_b = (n − 1) ∧ (len − 1)."""
    s, e = interval
    q = min(panel.n - 1, e - s)
    eigenvalues = torch.linalg.eigvalsh(sample_covariance(panel, interval))
    eigenvalues = eigenvalues.flip(-1)[:q].clamp(min=0.0)

    cumulative = eigenvalues.cumsum(0)
    total = cumulative[-1].item()
    if total <= 0:
        return [None] * len(c_grid)

    ratio = cumulative / total
    return [int((ratio > c).nonzero()[0].item()) + 1 for c in c_grid]


def kbc_table(
    panel: TimeSeriesPanel, locations: Sequence[int], c_grid: Sequence[float]
) -> pd.DataFrame:
    """k_b(c) for every segment (rows) and every c (columns)."""
    if any(not 0 < c < 1 for c in c_grid):
        raise ValueError("every c must lie in (0, 1)")

    columns = [f"{c:g}" for c in c_grid]
    records = []
    for s, e in segment_bounds(locations, panel.T):
        if e - s + 1 < 2:
            continue
        row = kbc_row(panel, (s, e), c_grid)
        records.append(dict(start=s, end=e, **dict(zip(columns, row))))

    return pd.DataFrame.from_records(records, columns=["start", "end", *columns])
