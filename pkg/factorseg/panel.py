"""The observed panel x_{it}: storage, CSV ingestion and centering."""

import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Literal

import numpy as np
import pandas as pd
import torch
from einops import rearrange
from torch import Tensor

from .errors import DimensionError, FormatError, InputError, ParseError, RangeError
from .utils import as_float64

Orientation = Literal["rows-are-series", "rows-are-time"]

MIN_SERIES = 2
MIN_LENGTH = 8


@dataclass(frozen=True)
class TimeSeriesPanel:
    """An n × T panel of real-valued time series.

    Values are kept column-major in time, so the cross-section x_t = values[:, t] is
    a contiguous slice. Instances are immutable and can be shared between workers.
    """

    values: Tensor
    """Float64 matrix of shape (n, T)."""
    centered: bool = False
    """Whether every row has had its sample mean removed."""
    series_labels: tuple[str, ...] | None = None
    """Optional identifiers for the n series."""
    time_labels: tuple[str, ...] | None = None
    """Optional identifiers for the T time points."""

    def __post_init__(self):
        values = as_float64(self.values)
        if values.dim() != 2:
            raise DimensionError(f"panel must be 2D, got shape {tuple(values.shape)}")
        if not values.isfinite().all():
            raise InputError("panel contains non-finite values")

        # Store time-major so that columns are contiguous
        object.__setattr__(self, "values", values.mT.contiguous().mT)

        n, T = values.shape
        if self.series_labels is not None and len(self.series_labels) != n:
            raise DimensionError(
                f"got {len(self.series_labels)} series labels for {n} series"
            )
        if self.time_labels is not None and len(self.time_labels) != T:
            raise DimensionError(
                f"got {len(self.time_labels)} time labels for {T} time points"
            )

        if self.centered:
            row_scale = values.abs().amax(dim=1).clamp(min=1.0)
            if (values.sum(dim=1).abs() > 1e-10 * T * row_scale).any():
                raise InputError("panel is flagged as centered but has nonzero means")

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    def window(self, s: int, e: int) -> Tensor:
        """Columns s..e (1-based, inclusive) as an (n, e − s + 1) view."""
        if not 1 <= s <= e <= self.T:
            raise RangeError(f"interval [{s}, {e}] is outside [1, {self.T}]")
        return self.values[:, s - 1 : e]

    def with_values(self, values: Tensor, centered: bool = False) -> "TimeSeriesPanel":
        """A panel with the same labels but new values."""
        return replace(self, values=values, centered=centered)


def center(panel: TimeSeriesPanel) -> TimeSeriesPanel:
    """Subtract each row's sample mean."""
    values = panel.values - panel.values.mean(dim=1, keepdim=True)
    return panel.with_values(values, centered=True)


def _is_header(first_row: pd.Series) -> bool:
    # A header is a first line in which no cell reads as a number
    return bool(pd.to_numeric(first_row, errors="coerce").isna().all())


def load_csv(
    path: Path | str, orientation: Orientation = "rows-are-series"
) -> TimeSeriesPanel:
    """Read a numeric CSV into a panel.

    Args:
        path: Comma-separated file with an optional single header line.
        orientation: Whether each CSV row holds one series or one time point.

    Returns:
        A panel of shape (n, T). Header cells become `series_labels` when rows are
        time points and `time_labels` when rows are series.

    Raises:
        FileNotFoundError: If `path` does not exist.
        FormatError: If the file is empty or its rows have different lengths.
        ParseError: If a cell is not a finite number; names the cell.
        DimensionError: If the panel has fewer than 2 series or 8 time points.
    """
    path = Path(path)
    try:
        raw = pd.read_csv(
            path,
            header=None,
            dtype=str,
            keep_default_na=False,
            skip_blank_lines=True,
            skipinitialspace=True,
        )
    except pd.errors.EmptyDataError as e:
        raise FormatError(f"{path} contains no data") from e
    except pd.errors.ParserError as e:
        raise FormatError(f"{path} has ragged rows: {e}") from e

    # Short rows are padded with NaN by the parser
    short = raw.isna().any(axis=1).to_numpy()
    if short.any():
        line = int(np.flatnonzero(short)[0]) + 1
        raise FormatError(
            f"{path} has ragged rows: line {line} has fewer than {raw.shape[1]} fields"
        )

    header: tuple[str, ...] | None = None
    offset = 1
    if len(raw) > 0 and _is_header(raw.iloc[0]):
        header = tuple(str(cell).strip() for cell in raw.iloc[0])
        raw = raw.iloc[1:]
        offset = 2

    numeric = raw.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(numeric)
    if bad.any():
        r, c = (int(i) for i in np.argwhere(bad)[0])
        cell = raw.iloc[r, c]
        raise ParseError(
            f"{path}: cell {cell!r} is not a finite number", r + offset, c + 1
        )

    matrix = torch.from_numpy(numeric)
    if orientation == "rows-are-time":
        matrix = rearrange(matrix, "t n -> n t")
        labels = dict(series_labels=header)
    else:
        labels = dict(time_labels=header)

    n, T = matrix.shape
    if n < MIN_SERIES or T < MIN_LENGTH:
        raise DimensionError(
            f"{path} holds {n} series of length {T}; need n ≥ {MIN_SERIES} and "
            f"T ≥ {MIN_LENGTH}"
        )

    logging.debug(f"Loaded {path}: n={n}, T={T}, header={header is not None}")
    return TimeSeriesPanel(matrix, **labels)


def save_csv(
    panel: TimeSeriesPanel,
    path: Path | str,
    orientation: Orientation = "rows-are-series",
) -> None:
    """Write a panel at full precision so that `load_csv` reproduces it bit-exactly."""
    matrix = panel.values.numpy()
    if orientation == "rows-are-time":
        df = pd.DataFrame(rearrange(matrix, "n t -> t n"), columns=panel.series_labels)
        has_header = panel.series_labels is not None
    else:
        df = pd.DataFrame(matrix, columns=panel.time_labels)
        has_header = panel.time_labels is not None

    df.to_csv(path, index=False, header=has_header, float_format="%.17g")
