"""Seeded generators for stationary and piecewise-stationary factor models."""

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, NamedTuple

import numpy as np
import pandas as pd
import torch
from simple_parsing.helpers import Serializable, field
from torch import Tensor

from ..errors import ConfigError
from ..panel import TimeSeriesPanel
from ..utils import generator

Scenario = Literal["null", "S1", "S2", "S3", "S4", "S5", "M1", "M2"]
BreakKind = Literal[
    "loadings",
    "factor_autocorrelation",
    "new_factor",
    "factor_variance",
    "idio_autocorrelation",
    "idio_covariance",
    "idio_variance",
]

# Substream keys; each random ingredient has its own stream
_LOADINGS, _FACTORS, _IDIO, _PARAMS, _SUBSETS, _SHIFTS = range(6)


@dataclass
class ScenarioSpec(Serializable):
    scenario: Scenario = "null"
    """Which data generating process to use."""

    n: int = 100
    """Number of series."""

    T: int = 200
    """Number of time points."""

    q: int = 5
    """Number of factors before any break."""

    phi: float = 1.0
    """Scales the idiosyncratic variance relative to the common one."""

    sigma: float = math.sqrt(2)
    """Break magnitude: loading shift s.d. (S1, M2), new-factor loading s.d. (S3)
    or variance multiplier (M1)."""

    varrho: float = 1.0
    """Fraction of series affected by a break."""

    rho_f: float = 0.4
    """AR coefficient of the first factor; factor j uses rho_f − 0.05 (j − 1)."""

    rho: float = 0.5
    """Idiosyncratic AR coefficients are drawn from U(−rho, rho)."""

    beta: float = 0.2
    """Magnitude of the cross-sectional moving-average weights."""

    H: int | None = None
    """Cross-sectional bandwidth. Defaults to max(1, ⌊min(n/20, 10)⌋)."""

    break_fraction: float = 1 / 3
    """Position of the break in single-break scenarios, as a fraction of T."""

    burn_in: int = 100
    """Presample steps discarded from every autoregression."""

    delta_common: float = 2.0
    """M1 factor variance jump multiplier δ^f."""

    delta_idio: float = 2.0
    """M1 idiosyncratic variance jump multiplier δ^ε."""

    m1_loadings: Path | None = field(default=None, to_dict=False)
    """Optional CSV with an n × q loading matrix for M1; N(0, 1) loadings otherwise."""

    seed: int = 0

    def __post_init__(self):
        if self.n < 2 or self.T < 16:
            raise ConfigError("need n ≥ 2 and T ≥ 16")
        if self.q < 1:
            raise ConfigError("q must be at least 1")
        if not 0 < self.varrho <= 1:
            raise ConfigError("varrho must lie in (0, 1]")
        if not abs(self.rho_f) < 1:
            raise ConfigError("|rho_f| must be below 1")
        if not 0 < self.break_fraction < 1:
            raise ConfigError("break_fraction must lie in (0, 1)")
        if self.H is not None and self.H < 1:
            raise ConfigError("H must be at least 1")
        if self.seed < 0 or self.burn_in < 0:
            raise ConfigError("seed and burn_in must be non-negative")

    @property
    def bandwidth(self) -> int:
        if self.H is not None:
            return self.H
        return max(1, math.floor(min(self.n / 20, 10)))

    def at(self, fraction: float) -> int:
        """Break location for a fraction of T, rounded half up."""
        return math.floor(fraction * self.T + 0.5)

    @property
    def affected(self) -> int:
        return max(1, math.floor(self.varrho * self.n + 0.5))


class Break(NamedTuple):
    location: int
    """Last time point of the old regime."""
    origin: Literal["common", "idiosyncratic"]
    kind: BreakKind


@dataclass(frozen=True)
class GeneratedDataset:
    panel: TimeSeriesPanel
    """Observed panel x = χ + idio_scale · ε."""
    true_common: Tensor
    """(n, T) common component χ."""
    true_idio: Tensor
    """(n, T) idiosyncratic component ε before scaling."""
    idio_scale: float
    """√ϑ."""
    truth: tuple[Break, ...]
    spec: ScenarioSpec

    def breaks(self, origin: str) -> list[int]:
        return [b.location for b in self.truth if b.origin == origin]


def theta_scale(spec: ScenarioSpec) -> float:
    """ϑ = φ · q/(1 − ρ_f²) · (1 − ρ²)/(1 + 2Hβ²)."""
    H = spec.bandwidth
    return (
        spec.phi
        * spec.q
        / (1 - spec.rho_f**2)
        * (1 - spec.rho**2)
        / (1 + 2 * H * spec.beta**2)
    )


def ar1(innovations: Tensor, coefficients: Tensor) -> Tensor:
    """Run z_t = a_t z_{t−1} + e_t row-wise from z_0 = 0."""
    out = torch.empty_like(innovations)
    prev = torch.zeros(innovations.shape[0], dtype=innovations.dtype)
    for t in range(innovations.shape[1]):
        prev = coefficients[:, t] * prev + innovations[:, t]
        out[:, t] = prev
    return out


def moving_sum(v: Tensor, pad: int, H: int) -> Tensor:
    """Σ_{0<|k|≤H} v_{i+k,t} for the n central rows of a row-padded matrix."""
    n = v.shape[0] - 2 * pad
    csum = torch.cat([torch.zeros_like(v[:1]), v.cumsum(0)])
    i = torch.arange(n) + pad
    return csum[i + H + 1] - csum[i - H] - v[i]


def _subset(spec: ScenarioSpec, key: int) -> Tensor:
    rng = generator(spec.seed, _SUBSETS, key)
    mask = torch.zeros(spec.n, dtype=torch.bool)
    mask[torch.randperm(spec.n, generator=rng)[: spec.affected]] = True
    return mask


def _after(spec: ScenarioSpec, location: int, length: int) -> Tensor:
    """Boolean time mask of the new regime on a series with a burn-in prefix."""
    t = torch.arange(length)
    return t >= length - spec.T + location


def _factors(spec: ScenarioSpec, count: int, flip_at: int | None) -> Tensor:
    L = spec.T + spec.burn_in
    rng = generator(spec.seed, _FACTORS)
    u = torch.randn(count, L, generator=rng, dtype=torch.float64)

    base = spec.rho_f - 0.05 * torch.arange(count, dtype=torch.float64)
    coef = base.unsqueeze(1).expand(count, L).clone()
    if flip_at is not None:
        coef[:, _after(spec, flip_at, L)] *= -1
    return ar1(u, coef)[:, spec.burn_in :]


def _idiosyncratic(
    spec: ScenarioSpec,
    ar_flip: tuple[int, Tensor] | None = None,
    band_double: tuple[int, Tensor] | None = None,
) -> Tensor:
    n, L, H = spec.n, spec.T + spec.burn_in, spec.bandwidth
    pad = 2 * H
    params = generator(spec.seed, _PARAMS)
    rho = (2 * torch.rand(n, generator=params, dtype=torch.float64) - 1) * spec.rho
    beta = torch.where(
        torch.rand(n, generator=params) < 0.5, -spec.beta, spec.beta
    ).to(torch.float64)

    rng = generator(spec.seed, _IDIO)
    v = torch.randn(n + 2 * pad, L, generator=rng, dtype=torch.float64)
    driving = v[pad:-pad] + beta.unsqueeze(1) * moving_sum(v, pad, H)
    if band_double is not None:
        location, rows = band_double
        wide = v[pad:-pad] + beta.unsqueeze(1) * moving_sum(v, pad, 2 * H)
        mask = rows.unsqueeze(1) & _after(spec, location, L).unsqueeze(0)
        driving = torch.where(mask, wide, driving)

    coef = rho.unsqueeze(1).expand(n, L).clone()
    if ar_flip is not None:
        location, rows = ar_flip
        mask = rows.unsqueeze(1) & _after(spec, location, L).unsqueeze(0)
        coef = torch.where(mask, -coef, coef)

    return ar1(driving, coef)[:, spec.burn_in :]


def _loadings(spec: ScenarioSpec, cols: int, key: int = 0) -> Tensor:
    rng = generator(spec.seed, _LOADINGS, key)
    return torch.randn(spec.n, cols, generator=rng, dtype=torch.float64)


def _loading_shift(spec: ScenarioSpec, rows: Tensor) -> Tensor:
    rng = generator(spec.seed, _SHIFTS)
    delta = spec.sigma * torch.randn(spec.n, spec.q, generator=rng, dtype=torch.float64)
    return delta * rows.unsqueeze(1)


def _single(spec: ScenarioSpec) -> tuple[Tensor, Tensor, list[Break]]:
    eta = spec.at(spec.break_fraction)
    kind = spec.scenario
    new = torch.arange(spec.T) >= eta

    lam = _loadings(spec, spec.q)
    f = _factors(spec, spec.q, eta if kind == "S2" else None)
    chi = lam @ f
    truth: list[Break] = []

    if kind == "S1":
        rows = _subset(spec, 0)
        shifted = (lam + _loading_shift(spec, rows)) @ f
        chi = torch.where(new, shifted, chi)
        truth.append(Break(eta, "common", "loadings"))
    elif kind == "S2":
        truth.append(Break(eta, "common", "factor_autocorrelation"))
    elif kind == "S3":
        rows = _subset(spec, 0)
        extra = spec.sigma * _loadings(spec, 1, key=1) * rows.unsqueeze(1)
        f_new = _extra_factor(spec)
        chi = chi + torch.where(new, extra @ f_new, torch.zeros_like(chi))
        truth.append(Break(eta, "common", "new_factor"))

    ar_flip = band = None
    if kind == "S4":
        ar_flip = (eta, _subset(spec, 0))
        truth.append(Break(eta, "idiosyncratic", "idio_autocorrelation"))
    elif kind == "S5":
        band = (eta, _subset(spec, 0))
        truth.append(Break(eta, "idiosyncratic", "idio_covariance"))

    eps = _idiosyncratic(spec, ar_flip=ar_flip, band_double=band)
    return chi, eps, truth


def _extra_factor(spec: ScenarioSpec) -> Tensor:
    L = spec.T + spec.burn_in
    rng = generator(spec.seed, _FACTORS, 1)
    u = torch.randn(1, L, generator=rng, dtype=torch.float64)
    coef = torch.full((1, L), spec.rho_f, dtype=torch.float64)
    return ar1(u, coef)[:, spec.burn_in :]


def _m2(spec: ScenarioSpec) -> tuple[Tensor, Tensor, list[Break]]:
    eta1, eta2, eta_e, eta3 = (spec.at(x) for x in (1 / 3, 1 / 2, 3 / 5, 4 / 5))
    t = torch.arange(spec.T)

    lam = _loadings(spec, spec.q)
    f = _factors(spec, spec.q, eta2)
    shifted = lam + _loading_shift(spec, _subset(spec, 0))
    chi = torch.where(t >= eta1, shifted @ f, lam @ f)

    rows3 = _subset(spec, 2)
    extra = math.sqrt(2) * _loadings(spec, 1, key=1) * rows3.unsqueeze(1)
    emerging = extra @ _extra_factor(spec)
    chi = chi + torch.where(t >= eta3, emerging, torch.zeros_like(chi))

    eps = _idiosyncratic(spec, ar_flip=(eta_e, _subset(spec, 1)))
    truth = [
        Break(eta1, "common", "loadings"),
        Break(eta2, "common", "factor_autocorrelation"),
        Break(eta_e, "idiosyncratic", "idio_autocorrelation"),
        Break(eta3, "common", "new_factor"),
    ]
    return chi, eps, truth


def _student_t7(rows: int, cols: int, rng: torch.Generator) -> Tensor:
    z = torch.randn(rows, cols, generator=rng, dtype=torch.float64)
    normals = torch.randn(7, rows, cols, generator=rng, dtype=torch.float64)
    chi2 = normals.square().sum(0)
    return z / (chi2 / 7).sqrt()


def _variance_regimes(spec: ScenarioSpec, locations: list[int], delta: float) -> Tensor:
    """Scale (σδ)^{g_b} for each time point; g_b is +1 for even b, −1 for odd b."""
    scale = torch.ones(spec.T, dtype=torch.float64)
    bounds = locations + [spec.T]
    for b, (start, end) in enumerate(zip(bounds[:-1], bounds[1:]), start=1):
        g = 1 if b % 2 == 0 else -1
        scale[start:end] = (spec.sigma * delta) ** g
    return scale


def _m1_loadings(spec: ScenarioSpec) -> Tensor:
    if spec.m1_loadings is None:
        return _loadings(spec, spec.q)

    lam = torch.from_numpy(
        pd.read_csv(spec.m1_loadings, header=None).to_numpy(dtype=np.float64)
    )
    if lam.shape != (spec.n, spec.q):
        raise ConfigError(
            f"M1 loadings have shape {tuple(lam.shape)}, expected ({spec.n}, {spec.q})"
        )
    return lam


def _m1(spec: ScenarioSpec) -> tuple[Tensor, Tensor, list[Break], float]:
    chi_breaks = [spec.at(1 / 3), spec.at(1 / 2)]
    eps_breaks = [spec.at(1 / 2), spec.at(4 / 5)]

    f = _student_t7(spec.q, spec.T, generator(spec.seed, _FACTORS))
    f = f * _variance_regimes(spec, chi_breaks, spec.delta_common)
    eps = _student_t7(spec.n, spec.T, generator(spec.seed, _IDIO))
    eps = eps * _variance_regimes(spec, eps_breaks, spec.delta_idio)

    chi = _m1_loadings(spec) @ f
    theta = spec.phi * (chi.var(dim=1).sum() / eps.var(dim=1).sum()).item()
    truth = [Break(b, "common", "factor_variance") for b in chi_breaks] + [
        Break(b, "idiosyncratic", "idio_variance") for b in eps_breaks
    ]
    return chi, eps, truth, theta


def generate(spec: ScenarioSpec) -> GeneratedDataset:
    """Simulate one panel from `spec`; identical specs give bit-identical output.

    Raises:
        ConfigError: If the scenario settings are unusable, e.g. phi ≤ 0.
    """
    if not spec.phi > 0:
        raise ConfigError("phi must be positive")

    if spec.scenario == "M1":
        chi, eps, truth, theta = _m1(spec)
    else:
        chi, eps, truth = _m2(spec) if spec.scenario == "M2" else _single(spec)
        theta = theta_scale(spec)

    scale = math.sqrt(theta)
    truth.sort(key=lambda b: (b.location, b.origin))
    return GeneratedDataset(
        panel=TimeSeriesPanel(chi + scale * eps),
        true_common=chi,
        true_idio=eps,
        idio_scale=scale,
        truth=tuple(truth),
        spec=spec,
    )
