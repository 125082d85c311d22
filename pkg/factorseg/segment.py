"""CUSUM series, the Double CUSUM statistic and Double CUSUM Binary Segmentation."""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Literal, NamedTuple, Protocol

import torch
from torch import Tensor

from .errors import IntervalError, LengthError
from .wavelet import WaveletPanel

Origin = Literal["common", "idiosyncratic", "raw"]


@dataclass(frozen=True)
class CusumMatrix:
    """Scaled CUSUM series Y^ℓ_{s,b,e} for b = s..e−1 over the retained rows."""

    interval: tuple[int, int]
    """(s, e), 1-based and inclusive."""
    values: Tensor
    """(retained rows, e − s) matrix; column c corresponds to b = s + c."""
    sigmas: Tensor
    """σ_ℓ of each retained row."""
    retained: Tensor
    """Indices of the retained rows in the source panel."""
    excluded: tuple[int, ...] = ()
    """Rows dropped because σ_ℓ = 0."""

    @property
    def rows(self) -> int:
        return self.values.shape[0]


class DcResult(NamedTuple):
    statistic: float
    """max over (b, m) of the Double CUSUM 𝒟_{s,b,e}(m)."""
    location: int
    """The maximising b, so that [s, b] and [b+1, e] are the two sides."""
    m: int
    """Number of leading CUSUM moduli at the maximum."""
    per_b_curve: Tensor | None = None
    """max over m of 𝒟_{s,b,e}(m) for each admissible b."""


def cusum(panel: WaveletPanel, s: int, e: int) -> CusumMatrix:
    """CUSUM series of every row with positive σ_ℓ over [s, e].

    Y^ℓ_{s,b,e} = σ_ℓ⁻¹ √((b−s+1)(e−b)/(e−s+1)) · (left mean − right mean),
    with σ_ℓ taken over the full series.

    Raises:
        IntervalError: If e ≤ s or the interval leaves [1, T].
    """
    if e <= s:
        raise IntervalError(f"interval [{s}, {e}] has no split point")
    if s < 1 or e > panel.T:
        raise IntervalError(f"interval [{s}, {e}] is outside [1, {panel.T}]")

    keep = panel.sigmas > 0
    retained = keep.nonzero().squeeze(1)
    excluded = tuple((~keep).nonzero().squeeze(1).tolist())
    if excluded:
        logging.debug(f"CUSUM on [{s}, {e}] excludes {len(excluded)} flat rows")

    y = panel.values[retained, s - 1 : e]
    sigmas = panel.sigmas[retained]

    length = e - s + 1
    left_n = torch.arange(1, length, dtype=torch.float64)
    right_n = length - left_n

    csum = y.cumsum(dim=1)
    left = csum[:, :-1]
    right = csum[:, -1:] - left
    weight = (left_n * right_n / length).sqrt()
    values = weight * (left / left_n - right / right_n) / sigmas.unsqueeze(1)

    return CusumMatrix((s, e), values, sigmas, retained, excluded)


def dc_surface(abs_cusums: Tensor) -> Tensor:
    """𝒟(m) for m = 1..N (rows) at every split point (columns).

    Args:
        abs_cusums: (N, B) matrix of CUSUM moduli.
    """
    N = abs_cusums.shape[0]
    ordered = abs_cusums.sort(dim=0, descending=True).values
    head = ordered.cumsum(dim=0)
    tail = head[-1:] - head

    m = torch.arange(1, N + 1, dtype=abs_cusums.dtype).unsqueeze(1)
    weight = (m * (2 * N - m) / (2 * N)).sqrt()
    return weight * (head / m - tail / (2 * N - m))


def double_cusum(cusums: CusumMatrix, trim: int = 0) -> DcResult:
    """Double CUSUM statistic over split points b ∈ [s + trim, e − 1 − trim].

    Ties go to the smallest b, then the smallest m.

    Raises:
        LengthError: If no row is retained or the trimmed range is empty.
    """
    if cusums.rows == 0:
        raise LengthError("double_cusum needs at least one retained row")

    s, e = cusums.interval
    # Both sides keep more than `trim` points, so detected points end up more
    # than `trim` apart
    lo, hi = s + trim, e - 1 - trim
    if lo > hi:
        raise LengthError(f"trim {trim} leaves no split point in [{s}, {e}]")

    surface = dc_surface(cusums.values[:, lo - s : hi - s + 1].abs())
    N = surface.shape[0]

    # Flatten b-major so that argmax returns the smallest b, then the smallest m
    flat = surface.mT.reshape(-1)
    idx = int(flat.argmax().item())
    b_offset, m_idx = divmod(idx, N)
    return DcResult(
        statistic=flat[idx].item(),
        location=lo + b_offset,
        m=m_idx + 1,
        per_b_curve=surface.amax(dim=0),
    )


def dc_statistic(panel: WaveletPanel, s: int, e: int, trim: int) -> float:
    """Double CUSUM statistic of [s, e]; zero when every row is flat."""
    cusums = cusum(panel, s, e)
    if cusums.rows == 0:
        return 0.0
    return double_cusum(cusums, trim).statistic


def default_trim(T: int, log_base: float = math.e) -> int:
    """d_T = ⌊min(log²T, 0.25 · T^{6/7})⌋, natural log by default."""
    if T < 16:
        raise LengthError(f"need at least 16 time points, got {T}")
    return math.floor(min(math.log(T, log_base) ** 2, 0.25 * T ** (6 / 7)))


class ThresholdProvider(Protocol):
    def __call__(self, s: int, e: int) -> float | None:
        """Threshold π for the node [s, e], or None if the node was never prepared."""
        ...


@dataclass(frozen=True)
class FixedThreshold:
    """The same threshold for every node."""

    value: float

    def __call__(self, s: int, e: int) -> float | None:
        return self.value


class ChangePoint(NamedTuple):
    location: int
    level: int
    """Depth u of the node that produced the point; the root is level 1."""
    node: int
    """Index v of the node within its level."""
    statistic: float
    threshold: float


class ExaminedNode(NamedTuple):
    level: int
    node: int
    start: int
    end: int
    statistic: float
    threshold: float | None
    location: int
    m: int
    rejected: bool
    profile: Tensor | None = None
    """Per-b DC curve over the admissible split points."""


@dataclass(frozen=True)
class ChangePointSet:
    """Change-points found by one DCBS run, sorted by location."""

    points: tuple[ChangePoint, ...]
    origin: Origin
    nodes: tuple[ExaminedNode, ...] = field(default=(), compare=False)
    """Every node whose statistic was computed, in level order."""

    @property
    def locations(self) -> list[int]:
        return [p.location for p in self.points]

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def merged(self, other: "ChangePointSet") -> "ChangePointSet":
        """Union of two sets of the same origin, kept sorted by location."""
        points = sorted(self.points + other.points, key=lambda p: p.location)
        return ChangePointSet(tuple(points), self.origin, self.nodes + other.nodes)


def dcbs(
    panel: WaveletPanel,
    threshold_provider: ThresholdProvider,
    d_T: int,
    max_depth: int,
    *,
    min_gap: int | None = None,
    root: tuple[int, int] | None = None,
    keep_profiles: bool = False,
) -> ChangePointSet:
    """Double CUSUM Binary Segmentation.

    Nodes are visited in level order starting from (1, 1) = `root`. A node [s, e]
    with e − s + 1 > 4·d_T is tested over b ∈ [s + g, e − 1 − g], where
    g = max(d_T, min_gap). If its statistic exceeds π the split is recorded and both
    halves become nodes (u+1, 2v−1) and (u+1, 2v). Levels deeper than `max_depth`
    are never tested.

    Args:
        panel: Transformed panel.
        threshold_provider: Maps a node interval to its threshold; a node for which
            it returns None is treated as terminal.
        d_T: Trim width, at least 1.
        max_depth: Largest level that may be tested.
        min_gap: Optional larger trim; defaults to d_T.
        root: Interval to segment; defaults to the usable columns of the panel.
        keep_profiles: Store each node's per-b DC curve.
    """
    if d_T < 1:
        raise ValueError(f"d_T must be at least 1, got {d_T}")

    gap = max(d_T, min_gap or d_T)
    s0, e0 = root if root is not None else (panel.burn_in + 1, panel.T)
    origin = panel.source

    points: list[ChangePoint] = []
    examined: list[ExaminedNode] = []
    queue = deque([(1, 1, s0, e0)])
    while queue:
        u, v, s, e = queue.popleft()
        if u > max_depth or e - s + 1 <= 4 * d_T or e - s + 1 <= 2 * gap:
            continue

        cusums = cusum(panel, s, e)
        if cusums.rows == 0:
            continue

        dc = double_cusum(cusums, trim=gap)
        threshold = threshold_provider(s, e)
        rejected = threshold is not None and dc.statistic > threshold
        logging.debug(
            f"{origin} node ({u}, {v}) on [{s}, {e}]: DC={dc.statistic:.4g}, "
            f"threshold={threshold}, argmax={dc.location}, split={rejected}"
        )
        examined.append(
            ExaminedNode(
                level=u,
                node=v,
                start=s,
                end=e,
                statistic=dc.statistic,
                threshold=threshold,
                location=dc.location,
                m=dc.m,
                rejected=rejected,
                profile=dc.per_b_curve if keep_profiles else None,
            )
        )
        if not rejected:
            continue

        assert threshold is not None
        points.append(ChangePoint(dc.location, u, v, dc.statistic, threshold))
        queue.append((u + 1, 2 * v - 1, s, dc.location))
        queue.append((u + 1, 2 * v, dc.location + 1, e))

    points.sort(key=lambda p: p.location)
    return ChangePointSet(tuple(points), origin, tuple(examined))
