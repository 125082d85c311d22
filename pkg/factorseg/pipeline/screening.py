import logging
from dataclasses import dataclass

from ..errors import DimensionError
from ..factor import bai_ng_factor_number, max_factor_number
from ..panel import TimeSeriesPanel


@dataclass(frozen=True)
class ScreeningRange:
    """Candidate factor numbers r̲, ..., r̄."""

    r_lower: int
    r_upper: int

    def __post_init__(self):
        if not 1 <= self.r_lower <= self.r_upper:
            raise ValueError(f"invalid range [{self.r_lower}, {self.r_upper}]")

    @property
    def candidates(self) -> tuple[int, ...]:
        return tuple(range(self.r_lower, self.r_upper + 1))


def screening_range(
    panel: TimeSeriesPanel, r_upper: int | None = None
) -> ScreeningRange:
    """Screening range of factor numbers.

    The upper end is max(20, ⌊√(n ∧ T)⌋), at most n − 1. The lower end minimises
    the information criterion with penalty (n ∧ T)⁻¹ log(n ∧ T).

    Raises:
        DimensionError: If n < 4 or T < 32.
    """
    if panel.n < 4 or panel.T < 32:
        raise DimensionError(
            f"screening needs n ≥ 4 and T ≥ 32, got n={panel.n}, T={panel.T}"
        )

    upper = max_factor_number(panel.n, panel.T)
    if r_upper is not None:
        upper = min(r_upper, panel.n - 1, panel.T - 1)

    lower = bai_ng_factor_number(panel, None, upper, "screen")
    logging.info(f"Screening factor numbers {lower}..{upper}")
    return ScreeningRange(lower, upper)
