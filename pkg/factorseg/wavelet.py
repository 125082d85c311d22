"""Haar wavelet filters and the transforms that turn second-order changes into
changes in the mean of a derived panel."""

import logging
import math
from dataclasses import dataclass, field
from typing import Literal, NamedTuple, Sequence

import torch
import torch.nn.functional as F
from simple_parsing.helpers import Serializable
from torch import Tensor

from .errors import (
    ConfigError,
    DegenerateInputError,
    LengthError,
    ResourceError,
    ScaleError,
)
from .utils import as_float64

Boundary = Literal["reflect", "burn_in"]
PanelMode = Literal["reduced", "full"]
Source = Literal["common", "idiosyncratic", "raw"]

FINEST_SCALE = -1
COARSEST_SCALE = -20


@dataclass
class WaveletConfig(Serializable):
    mode: PanelMode = "reduced"
    """`reduced` keeps the n auto rows per scale; `full` adds the n(n−1)/2 cross
    rows."""

    scale_constant: float = 1.0
    """C in J* = ⌊C · log₂ log₂^υ T⌋."""

    scale_exponent: float = 1.0
    """υ in J* = ⌊C · log₂ log₂^υ T⌋, within (0, 1]."""

    boundary: Boundary = "reflect"
    """How the first L_j − 1 coefficients are formed. `reflect` mirrors the series at
    the left edge; `burn_in` zeroes them and keeps them out of every CUSUM."""

    max_rows: int = 20_000
    """Upper bound on the number of rows of a transformed panel."""

    def __post_init__(self):
        if self.scale_constant <= 0:
            raise ConfigError("scale_constant must be positive")
        if not 0 < self.scale_exponent <= 1:
            raise ConfigError("scale_exponent must lie in (0, 1]")
        if self.max_rows < 1:
            raise ConfigError("max_rows must be positive")


class HaarFilter(NamedTuple):
    scale: int
    coefficients: Tensor

    @property
    def length(self) -> int:
        return len(self.coefficients)


def haar_filter(j: int) -> HaarFilter:
    """Haar filter at scale j: 2^{j/2} on the first half, −2^{j/2} on the second.

    Raises:
        ScaleError: If j is not in [−20, −1].
    """
    if not COARSEST_SCALE <= j <= FINEST_SCALE:
        raise ScaleError(
            f"scale must lie in [{COARSEST_SCALE}, {FINEST_SCALE}], got {j}"
        )

    half = 2 ** (-j - 1)
    value = 2.0 ** (j / 2)
    coefficients = torch.full((2 * half,), value, dtype=torch.float64)
    coefficients[half:] = -value
    return HaarFilter(j, coefficients)


def scale_count(T: int, C: float = 1.0, upsilon: float = 1.0) -> int:
    """Number of finest scales used, ⌊C · log₂(log₂(T)^υ)⌋ and at least 1."""
    if T < 8:
        raise LengthError(f"need at least 8 time points, got {T}")
    return max(1, math.floor(C * math.log2(math.log2(T) ** upsilon)))


def wavelet_coefficients(x: Tensor, j: int, boundary: Boundary = "reflect") -> Tensor:
    """Signed coefficients d_t = Σ_l x_{t−l} ψ_{j,l} for every row of x.

    Args:
        x: A series of shape (T,) or a batch of shape (m, T).
        j: Scale, in [−20, −1].
        boundary: Treatment of t < L_j.

    Returns:
        Coefficients with the shape of x.
    """
    filt = haar_filter(j)
    x = as_float64(x)
    squeeze = x.dim() == 1
    batch = x.reshape(-1, 1, x.shape[-1])

    T, L = batch.shape[-1], filt.length
    if T < L:
        raise LengthError(f"series of length {T} is shorter than the scale {j} filter")

    if L > 1 and boundary == "reflect":
        padded = F.pad(batch, (L - 1, 0), mode="reflect")
    else:
        padded = F.pad(batch, (L - 1, 0))

    # conv1d is a cross-correlation, so the filter is flipped
    d = F.conv1d(padded, filt.coefficients.flip(0).view(1, 1, L)).squeeze(1)
    if boundary == "burn_in":
        d[:, : L - 1] = 0.0

    return d.squeeze(0) if squeeze else d


def transform_g(series: Tensor, j: int, boundary: Boundary = "reflect") -> Tensor:
    """g_j(x)_t = |Σ_l x_{t−l} ψ_{j,l}|."""
    return wavelet_coefficients(series, j, boundary).abs()


def transform_h(
    series_a: Tensor,
    series_b: Tensor,
    j: int,
    s: int,
    boundary: Boundary = "reflect",
) -> Tensor:
    """h_j(a, b)_t = |d_{a,t} + s · d_{b,t}| with signed wavelet coefficients d."""
    if series_a.shape != series_b.shape:
        raise LengthError(
            f"series lengths differ: {tuple(series_a.shape)} vs {tuple(series_b.shape)}"
        )
    if s not in (-1, 1):
        raise ValueError(f"s must be ±1, got {s}")

    pair = torch.stack([as_float64(series_a), as_float64(series_b)])
    d = wavelet_coefficients(pair, j, boundary)
    return (d[0] + s * d[1]).abs()


def _is_flat(series: Tensor, centered: Tensor) -> bool:
    # Mean removal leaves rounding residue on constant series
    scale = max(1.0, as_float64(series).abs().max().item())
    return centered.abs().max().item() <= 1e-12 * scale


def choose_sign(series_a: Tensor, series_b: Tensor) -> int:
    """−sign of the sample correlation of two series, with +1 for zero correlation.

    Raises:
        DegenerateInputError: If either series has zero sample variance.
    """
    a = as_float64(series_a) - as_float64(series_a).mean()
    b = as_float64(series_b) - as_float64(series_b).mean()
    norm_a, norm_b = a.norm().item(), b.norm().item()
    if _is_flat(series_a, a) or _is_flat(series_b, b):
        raise DegenerateInputError("sign is undefined for a zero-variance series")

    corr = (a @ b).item() / (norm_a * norm_b)
    return 1 if corr <= 0 else -1


def sign_matrix(source: Tensor) -> Tensor:
    """Pairwise signs s_{ii'} = −sign(cor(x_i, x_i')), +1 for zero or undefined
    correlation."""
    corr = torch.corrcoef(source)
    undefined = int(corr.isnan().triu(diagonal=1).sum())
    if undefined:
        logging.info(
            f"{undefined} series pairs have undefined correlation; their sign is +1"
        )
    corr = corr.nan_to_num(0.0)
    signs = -corr.sign()
    return torch.where(signs == 0, torch.ones_like(signs), signs)


class RowMeta(NamedTuple):
    scale: int
    kind: Literal["auto", "cross"]
    i: int
    """0-based series index."""
    i2: int | None
    """0-based partner index for cross rows."""
    sign: int


@dataclass(frozen=True)
class WaveletPanel:
    """Panel y_{ℓt} of transformed series, one row per (scale, series or pair)."""

    values: Tensor
    """Non-negative (rows, T) matrix."""
    row_meta: tuple[RowMeta, ...]
    """Descriptor of each row."""
    sigmas: Tensor
    """σ_ℓ = sqrt(mean_t y²_{ℓt}) over the usable columns, one per row."""
    source: Source
    """Which component was transformed."""
    J_star: int
    """Scale budget; the panel holds scales among −1..−J_star."""
    mode: PanelMode
    scales: tuple[int, ...]
    """Scales actually present, finest first."""
    boundary: Boundary = "reflect"
    burn_in: int = 0
    """Number of leading columns excluded from CUSUMs."""
    signs: Tensor | None = field(default=None, repr=False)
    """(n, n) sign matrix used for cross rows in full mode."""
    max_rows: int = 20_000

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def T(self) -> int:
        return self.values.shape[1]

    def transform_like(self, source: Tensor) -> "WaveletPanel":
        """Transform another n × T matrix with the same scales, mode, boundary rule
        and signs as this panel."""
        return build_panel(
            source,
            self.J_star,
            self.mode,
            scales=self.scales,
            signs=self.signs,
            boundary=self.boundary,
            max_rows=self.max_rows,
            source_kind=self.source,
        )

    def select_scale(self, j: int) -> "WaveletPanel":
        """Sub-panel holding only the rows of scale j."""
        keep = [idx for idx, meta in enumerate(self.row_meta) if meta.scale == j]
        if not keep:
            raise ScaleError(f"scale {j} is not part of this panel")

        index = torch.tensor(keep)
        values = self.values[index]
        burn_in = 2 ** (-j) - 1 if self.boundary == "burn_in" else 0
        # The parent panel's burn-in follows its coarsest scale
        sigmas = (
            values[:, burn_in:].square().mean(dim=1).sqrt()
            if burn_in != self.burn_in
            else self.sigmas[index]
        )
        return WaveletPanel(
            values=values,
            row_meta=tuple(self.row_meta[i] for i in keep),
            sigmas=sigmas,
            source=self.source,
            J_star=self.J_star,
            mode=self.mode,
            scales=(j,),
            boundary=self.boundary,
            burn_in=burn_in,
            signs=self.signs,
            max_rows=self.max_rows,
        )


def panel_rows(n: int, J_star: int, mode: PanelMode) -> int:
    per_scale = n if mode == "reduced" else n * (n + 1) // 2
    return J_star * per_scale


def build_panel(
    source: Tensor,
    J_star: int,
    mode: PanelMode = "reduced",
    *,
    scales: Sequence[int] | None = None,
    signs: Tensor | None = None,
    boundary: Boundary = "reflect",
    max_rows: int = 20_000,
    source_kind: Source = "common",
) -> WaveletPanel:
    """Transform an n × T component into the panel of g_j (and h_j) rows.

    Rows are grouped by scale, finest first. Within a scale come the n auto rows
    g_j(x_i), followed in full mode by the cross rows h_j(x_i, x_i') for i < i'.

    Args:
        source: (n, T) matrix of the component to transform.
        J_star: Scale budget; scales −1..−J_star are used unless `scales` is given.
        mode: `reduced` or `full`.
        scales: Explicit subset of scales, e.g. a single scale for sequential runs.
        signs: Sign matrix for cross rows; estimated from `source` when omitted.
        boundary: Treatment of t < L_j.
        max_rows: Row cap.
        source_kind: Label recorded on the panel.

    Raises:
        ResourceError: If the panel would exceed `max_rows` rows.
    """
    if J_star < 1:
        raise ScaleError(f"J_star must be at least 1, got {J_star}")

    source = as_float64(source)
    n, T = source.shape
    scales = tuple(scales) if scales is not None else tuple(range(-1, -J_star - 1, -1))

    num_rows = len(scales) * panel_rows(n, 1, mode)
    if num_rows > max_rows:
        raise ResourceError(
            f"a {mode} panel would have {num_rows} rows, above the cap of {max_rows}; "
            "use the reduced mode or raise max_rows"
        )

    if mode == "full" and signs is None:
        signs = sign_matrix(source)
    pairs = torch.triu_indices(n, n, offset=1)

    blocks, meta = [], []
    for j in scales:
        d = wavelet_coefficients(source, j, boundary)
        blocks.append(d.abs())
        meta.extend(RowMeta(j, "auto", i, None, 1) for i in range(n))

        if mode == "full":
            assert signs is not None
            s = signs[pairs[0], pairs[1]]
            blocks.append((d[pairs[0]] + s.unsqueeze(1) * d[pairs[1]]).abs())
            meta.extend(
                RowMeta(j, "cross", int(a), int(b), int(sign))
                for a, b, sign in zip(pairs[0], pairs[1], s)
            )

    values = torch.cat(blocks)
    burn_in = 2 ** (-min(scales)) - 1 if boundary == "burn_in" else 0
    sigmas = values[:, burn_in:].square().mean(dim=1).sqrt()

    zero = int((sigmas == 0).sum())
    if zero:
        logging.debug(f"{zero} of {len(sigmas)} transformed rows have zero variance")

    return WaveletPanel(
        values=values,
        row_meta=tuple(meta),
        sigmas=sigmas,
        source=source_kind,
        J_star=J_star,
        mode=mode,
        scales=scales,
        boundary=boundary,
        burn_in=burn_in,
        signs=signs,
        max_rows=max_rows,
    )
