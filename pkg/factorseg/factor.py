"""Sample covariance, eigendecomposition, capped PCA and factor-number selection."""

import logging
import math
from dataclasses import dataclass
from typing import Literal, NamedTuple

import torch
from torch import Tensor

from .errors import DimensionError, InputError, RangeError
from .panel import TimeSeriesPanel

CapConstant = float | Literal["auto"]
Penalty = Literal["screen", "segment"]

# Relative floor for residual variances, so that log V(k) stays finite on exact
# low-rank panels
RESIDUAL_FLOOR = 1e-12


class EigenSystem(NamedTuple):
    """Leading eigenpairs, sorted by non-increasing eigenvalue."""

    eigenvalues: Tensor
    eigenvectors: Tensor


class CappedEigenvectors(NamedTuple):
    vectors: Tensor
    """Eigenvectors with every entry clamped to ±c_w/√n."""
    active: Tensor
    """Boolean mask of entries that were clamped."""


@dataclass(frozen=True)
class FactorDecomposition:
    """Split of a panel into common and idiosyncratic components using k factors."""

    k: int
    """Number of factors used."""
    loadings: Tensor
    """(n, k) matrix λ̂ = √n · w̃."""
    factors: Tensor
    """(k, T) matrix f̂_t = n^{-1/2} w̃ᵀ x_t."""
    common: Tensor
    """(n, T) common component χ̂ᵏ."""
    idiosyncratic: Tensor
    """(n, T) idiosyncratic component ε̂ᵏ = x − χ̂ᵏ."""
    cap_constant: float
    """Resolved capping constant c_w; `math.inf` when capping is disabled."""
    capping_active: Tensor
    """(n, k) boolean mask of clamped eigenvector entries."""
    eigenvalues: Tensor
    """Leading k eigenvalues of the covariance the decomposition was computed from."""

    @property
    def n(self) -> int:
        return self.common.shape[0]

    @property
    def T(self) -> int:
        return self.common.shape[1]


def _resolve_range(
    panel: TimeSeriesPanel, interval: tuple[int, int] | None
) -> tuple[int, int]:
    s, e = interval if interval is not None else (1, panel.T)
    if not 1 <= s <= e <= panel.T:
        raise RangeError(f"interval [{s}, {e}] is outside [1, {panel.T}]")
    if e - s + 1 < 2:
        raise RangeError(f"interval [{s}, {e}] is too short for a covariance")
    return s, e


def sample_covariance(
    panel: TimeSeriesPanel, interval: tuple[int, int] | None = None
) -> Tensor:
    """(e − s + 1)⁻¹ Σ_{t=s}^{e} x_t x_tᵀ over a 1-based inclusive interval.

    The panel is not demeaned here; callers pass centered panels, and segment
    covariances are taken around zero as the factor model prescribes.
    """
    s, e = _resolve_range(panel, interval)
    x = panel.window(s, e)
    cov = x @ x.mT / (e - s + 1)
    return (cov + cov.mT) / 2


def leading_eigen(cov: Tensor, m: int) -> EigenSystem:
    """Top-m eigenpairs of a symmetric matrix.

    Each eigenvector's sign is fixed so that its largest-magnitude entry (the first
    one, on ties) is positive; identical inputs give bit-identical outputs.

    Raises:
        InputError: If `cov` is not square or not symmetric to 1e-8.
        DimensionError: If m is not in [1, n].
    """
    if cov.dim() != 2 or cov.shape[0] != cov.shape[1]:
        raise InputError(f"expected a square matrix, got shape {tuple(cov.shape)}")

    n = cov.shape[0]
    if not 1 <= m <= n:
        raise DimensionError(f"cannot take {m} eigenpairs of a {n} × {n} matrix")

    scale = max(1.0, cov.abs().max().item())
    if (cov - cov.mT).abs().max().item() > 1e-8 * scale:
        raise InputError("covariance matrix is not symmetric")

    L, Q = torch.linalg.eigh(cov.to(torch.float64))
    L, Q = L.flip(-1)[:m], Q.flip(-1)[:, :m]

    pivots = Q.abs().argmax(dim=0)
    signs = Q.gather(0, pivots.unsqueeze(0)).sign().squeeze(0)
    signs = torch.where(signs == 0, torch.ones_like(signs), signs)
    return EigenSystem(L, Q * signs)


def cap_eigenvectors(eig: EigenSystem, c_w: float, n: int) -> CappedEigenvectors:
    """Clamp eigenvector entries to ±c_w/√n, keeping their signs."""
    if not c_w > 0:
        raise ValueError(f"c_w must be positive, got {c_w}")

    W = eig.eigenvectors
    root_n = math.sqrt(n)
    # Compare on the √n scale so that c_w = √n·max|ŵ| leaves every entry untouched
    active = W.abs() * root_n > c_w
    capped = torch.where(active, W.sign() * (c_w / root_n), W)
    return CappedEigenvectors(capped, active)


def max_factor_number(n: int, T: int) -> int:
    """Largest candidate factor number, max(20, ⌊√(n ∧ T)⌋) clipped to n − 1."""
    return min(max(20, math.isqrt(min(n, T))), n - 1)


def ic_penalty(n: int, T: int, penalty: Penalty, exponent: float = 2.0) -> float:
    """Per-factor penalty of the information criterion for an n × T window."""
    nT = min(n, T)
    if penalty == "screen":
        return math.log(nT) / nT

    root_T = math.sqrt(T)
    return (n + root_T) / (n * root_T) * math.log(min(n, root_T)) ** exponent


def ic_curve(
    panel: TimeSeriesPanel,
    interval: tuple[int, int] | None,
    r_max: int,
    penalty: Penalty = "screen",
    exponent: float = 2.0,
) -> Tensor:
    """IC(k) = log V(k) + k · p(n, T) for k = 1..r_max.

    V(k) is the mean squared residual of the k-factor (uncapped) PCA fit on the
    window, which equals the sum of the discarded eigenvalues divided by n.
    """
    s, e = _resolve_range(panel, interval)
    length = e - s + 1
    if not 1 <= r_max < min(panel.n, length):
        raise DimensionError(
            f"r_max = {r_max} must lie in [1, {min(panel.n, length) - 1}] "
            f"for a window of {panel.n} series and {length} time points"
        )

    cov = sample_covariance(panel, (s, e))
    eigenvalues = torch.linalg.eigvalsh(cov).flip(-1).clamp(min=0.0)
    total = eigenvalues.sum()

    residual = (total - eigenvalues[:r_max].cumsum(0)) / panel.n
    residual = residual.clamp(min=RESIDUAL_FLOOR * max(total.item(), 1e-300) / panel.n)

    p = ic_penalty(panel.n, length, penalty, exponent)
    ks = torch.arange(1, r_max + 1, dtype=torch.float64)
    return residual.log() + ks * p


def bai_ng_factor_number(
    panel: TimeSeriesPanel,
    interval: tuple[int, int] | None = None,
    r_max: int = 20,
    penalty: Penalty = "screen",
    exponent: float = 2.0,
) -> int:
    """Estimate the number of factors by minimising the information criterion.

    Args:
        panel: Panel to analyse; should be centered.
        interval: 1-based inclusive time window. Defaults to the whole panel.
        r_max: Largest candidate; must be below n ∧ (e − s + 1).
        penalty: `screen` uses (n∧T)⁻¹ log(n∧T); `segment` uses
            (n+√T)/(n√T) · log^a(n∧√T) with a = `exponent`.
        exponent: The exponent a of the segment penalty.

    Returns:
        The minimising k in 1..r_max; the smallest such k on ties.
    """
    curve = ic_curve(panel, interval, r_max, penalty, exponent)
    return int(curve.argmin().item()) + 1


def resolve_cap_constant(eig: EigenSystem, c_w: CapConstant, r_lower: int) -> float:
    """Turn a configured c_w into a number.

    `"auto"` picks √n · max_{i, j ≤ r̲} |ŵ_ij|, with r̲ the screening lower
    bound; `eig` must then hold at least r̲ eigenvectors.
    """
    if c_w != "auto":
        return float(c_w)

    W = eig.eigenvectors
    if W.shape[1] < r_lower:
        raise DimensionError(f"need {r_lower} eigenvectors, got {W.shape[1]}")
    return math.sqrt(W.shape[0]) * W[:, :r_lower].abs().max().item()


def decompose(
    panel: TimeSeriesPanel,
    k: int,
    c_w: CapConstant = math.inf,
    *,
    interval: tuple[int, int] | None = None,
    r_lower: int | None = None,
) -> FactorDecomposition:
    """Capped PCA estimate of the common and idiosyncratic components.

    Args:
        panel: Panel to decompose; should be centered.
        k: Number of factors, 1 ≤ k < n.
        c_w: Capping constant, `math.inf` to disable capping, or `"auto"` for the
            data-driven value.
        interval: Restrict covariance estimation and projection to this window.
        r_lower: Screening lower bound used by `"auto"`; estimated when omitted.

    Raises:
        DimensionError: If k is not in [1, n − 1].
    """
    if not 1 <= k < panel.n:
        raise DimensionError(f"k must lie in [1, {panel.n - 1}], got {k}")

    s, e = _resolve_range(panel, interval)
    m = k
    if c_w == "auto":
        if r_lower is None:
            r_max = max_factor_number(panel.n, e - s + 1)
            r_lower = bai_ng_factor_number(panel, (s, e), r_max, "screen")
        m = max(k, r_lower)

    eig = leading_eigen(sample_covariance(panel, (s, e)), m)
    cap = resolve_cap_constant(eig, c_w, r_lower or k)

    leading = EigenSystem(eig.eigenvalues[:k], eig.eigenvectors[:, :k])
    capped = cap_eigenvectors(leading, cap, panel.n)
    if capped.active.any():
        logging.debug(f"Capping clamped {int(capped.active.sum())} loadings at k={k}")

    x = panel.window(s, e)
    W = capped.vectors
    scores = W.mT @ x
    common = W @ scores
    return FactorDecomposition(
        k=k,
        loadings=math.sqrt(panel.n) * W,
        factors=scores / math.sqrt(panel.n),
        common=common,
        idiosyncratic=x - common,
        cap_constant=cap,
        capping_active=capped.active,
        eigenvalues=leading.eigenvalues,
    )
