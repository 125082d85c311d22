"""Stationary bootstrap for factor models and bootstrap thresholds for DCBS."""

import logging
import math
import warnings
from collections import deque
from dataclasses import dataclass
from functools import partial
from typing import Callable, Literal, Mapping, NamedTuple

import torch
import torch.multiprocessing as mp
from simple_parsing.helpers import Serializable, field
from torch import Tensor
from tqdm import tqdm

from .errors import ConfigError, DegenerateInputError, LengthError
from .factor import FactorDecomposition
from .segment import cusum, dc_statistic, double_cusum
from .utils import as_float64, autocovariance, generator, trapezoid_taper
from .wavelet import WaveletPanel

HorizonScaling = Literal["mean_T13", "panel_T15"]
Component = Literal["common", "idiosyncratic", "raw"]

# Node statistic: (panel, s, e, trim) -> value
Statistic = Callable[[WaveletPanel, int, int, int], float]

ROLE_COMMON = 0
ROLE_JOINT = 1


@dataclass
class SbConfig(Serializable):
    replicates: int = field(default=200, alias=["--R"])
    """Number of bootstrap replicates R."""

    alpha: float = 0.05
    """Level of the test; thresholds are (1 − alpha) quantiles."""

    p_common: tuple[float, ...] | None = None
    """Inverse mean block length for each factor. Estimated when omitted."""

    p_idio: float | None = None
    """Pooled inverse mean block length for the idiosyncratic vectors. Estimated
    when omitted."""

    seed: int = 0
    """Root seed for every replicate."""

    tree_height: int | None = None
    """Levels of the threshold tree. Defaults to ⌊log₂ T / 2⌋."""

    horizon: HorizonScaling = "panel_T15"
    """Rate used in the block length rule: T^{1/5} (`panel_T15`) or T^{1/3}."""

    retain_stats: bool = False
    """Keep every replicate statistic on the tree for diagnostics."""

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigError("replicates must be at least 1")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")
        if self.tree_height is not None and self.tree_height < 1:
            raise ConfigError("tree_height must be at least 1")

        params = list(self.p_common or ())
        if self.p_idio is not None:
            params.append(self.p_idio)
        if any(not 0 < p <= 1 for p in params):
            raise ConfigError("block parameters must lie in (0, 1]")

    def height(self, T: int) -> int:
        if self.tree_height is not None:
            return self.tree_height
        return max(1, math.floor(math.log2(T) / 2))


def block_lengths(count: int, p: float, rng: torch.Generator) -> Tensor:
    """Draw `count` geometric block lengths on {1, 2, ...} with mean 1/p."""
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")

    u = 1.0 - torch.rand(count, generator=rng, dtype=torch.float64)
    if p == 1:
        return torch.ones(count, dtype=torch.long)
    return (u.log() / math.log1p(-p)).floor().long() + 1


def sb_indices(T: int, p: float, rng: torch.Generator) -> Tensor:
    """Column indices of one stationary-bootstrap resample of length T.

    Blocks start at uniform positions, have geometric lengths and wrap around the
    end of the series.
    """
    lengths = block_lengths(T, p, rng).clamp(max=T)
    starts = torch.randint(T, (T,), generator=rng)

    ends = lengths.cumsum(0)
    q = int(torch.searchsorted(ends, T).item()) + 1
    lengths, starts, ends = lengths[:q], starts[:q], ends[:q]

    offsets = torch.arange(int(ends[-1].item())) - (ends - lengths).repeat_interleave(
        lengths
    )
    return ((starts.repeat_interleave(lengths) + offsets) % T)[:T]


def sb_resample(series_block: Tensor, p: float, rng: torch.Generator) -> Tensor:
    """Resample the columns of an (m, T) block, all rows with the same indices."""
    return series_block[:, sb_indices(series_block.shape[-1], p, rng)]


def block_length_politis_white(
    series: Tensor, horizon_scaling: HorizonScaling = "panel_T15"
) -> float:
    """Inverse mean block length p from the flat-top lag-window rule.

    p⁻¹ = (Ĝ² / ĝ(0)²)^{1/3} · T^{1/3} (or T^{1/5}), where Ĝ and ĝ(0) are
    taper-weighted sums of the sample autocovariances up to the bandwidth Λ. Λ is
    twice the first lag after which `kn` consecutive autocorrelations are
    insignificant, capped at ⌈√T⌉ + kn.

    Returns:
        p clamped so that the mean block length lies in [1, ⌈min(3√T, T/3)⌉].

    Raises:
        LengthError: If T < 20.
        DegenerateInputError: If the series is constant.
    """
    x = as_float64(series)
    if x.dim() != 1:
        raise ValueError("expected a 1D series")

    T = len(x)
    if T < 20:
        raise LengthError(f"need at least 20 observations, got {T}")

    kn = max(5, int(math.log10(T)))
    m_max = math.ceil(math.sqrt(T)) + kn
    b_max = math.ceil(min(3 * math.sqrt(T), T / 3))
    critical = 2 * math.sqrt(math.log10(T) / T)

    acov = autocovariance(x, m_max + kn)
    if acov[0].item() <= 1e-24 * max(1.0, x.abs().max().item() ** 2):
        raise DegenerateInputError("block length is undefined for a constant series")

    insignificant = (acov[1:] / acov[0]).abs() < critical
    m_hat = m_max
    for m in range(0, m_max + 1):
        if insignificant[m : m + kn].all():
            m_hat = m
            break

    bandwidth = min(2 * max(m_hat, 1), m_max)
    lags = torch.arange(-bandwidth, bandwidth + 1)
    weights = trapezoid_taper(lags / bandwidth)
    R = acov[lags.abs()]
    G = (weights * lags.abs() * R).sum().item()
    g0 = (weights * R).sum().item()

    if g0 <= 0:
        logging.debug("Non-positive spectral estimate at zero; using the longest block")
        return 1.0 / b_max

    rate = 1 / 3 if horizon_scaling == "mean_T13" else 1 / 5
    mean_length = (G**2 / g0**2) ** (1 / 3) * T**rate
    return 1.0 / min(max(mean_length, 1.0), b_max)


def _row_block_parameter(row: Tensor, horizon: HorizonScaling) -> float:
    try:
        return block_length_politis_white(row, horizon)
    except DegenerateInputError:
        # Any resample of a constant series is itself
        return 1.0


def pooled_block_parameter(
    block: Tensor, horizon: HorizonScaling = "panel_T15"
) -> float:
    """(n⁻¹ Σ p_i⁻¹)⁻¹ over the rows of an (n, T) block."""
    inverse = [1.0 / _row_block_parameter(row, horizon) for row in block]
    return 1.0 / (sum(inverse) / len(inverse))


class ResampleSource(NamedTuple):
    """What a replicate resamples.

    With `loadings`, each row of `series` is a factor resampled on its own stream
    and the replicate is `loadings @ factors`. Without, the rows of `series` are
    resampled jointly with `params[0]`.
    """

    series: Tensor
    params: tuple[float, ...]
    loadings: Tensor | None = None


def _clamped(p: float, T: int) -> float:
    """A configured block parameter, raised to 1/T if the blocks would outrun T."""
    if p < 1 / T:
        warnings.warn(f"Block parameter {p} is below 1/T; using {1 / T:.4g}")
        return 1 / T
    return p


def resample_source(
    decomp: FactorDecomposition, which: Component, cfg: SbConfig
) -> ResampleSource:
    """Resampling plan for one component of a decomposition."""
    if which == "common":
        if cfg.p_common is not None:
            if len(cfg.p_common) != decomp.k:
                raise ConfigError(
                    f"p_common has {len(cfg.p_common)} entries for {decomp.k} factors"
                )
            T = decomp.factors.shape[-1]
            params = tuple(_clamped(p, T) for p in cfg.p_common)
        else:
            params = tuple(
                _row_block_parameter(f, cfg.horizon) for f in decomp.factors
            )
        return ResampleSource(decomp.factors, params, decomp.loadings)

    block = decomp.idiosyncratic
    if which == "raw":
        block = decomp.common + decomp.idiosyncratic
    return joint_source(block, cfg)


def joint_source(block: Tensor, cfg: SbConfig) -> ResampleSource:
    """Resampling plan that keeps the cross-section of `block` together."""
    if cfg.p_idio is not None:
        p = _clamped(cfg.p_idio, block.shape[-1])
    else:
        p = pooled_block_parameter(block, cfg.horizon)
    return ResampleSource(block, (p,))


def draw_replicate(source: ResampleSource, seed: int, replicate: int) -> Tensor:
    """One bootstrap sample of the component described by `source`.

    Factor l of replicate m uses the substream (seed, m, 0, l); a joint block uses
    (seed, m, 1, 0). The result depends on nothing else.
    """
    T = source.series.shape[-1]
    if source.loadings is None:
        rng = generator(seed, replicate, ROLE_JOINT, 0)
        return sb_resample(source.series, source.params[0], rng)

    factors = torch.stack(
        [
            f[sb_indices(T, p, generator(seed, replicate, ROLE_COMMON, j))]
            for j, (f, p) in enumerate(zip(source.series, source.params))
        ]
    )
    return source.loadings @ factors


def bootstrap_statistic(
    decomp: FactorDecomposition,
    which: Component,
    interval: tuple[int, int],
    cfg: SbConfig,
    replicate: int,
    template: WaveletPanel,
    trim: int,
    statistic: Statistic = dc_statistic,
) -> float:
    """Statistic 𝒯•_{s,e} on one bootstrap replicate.

    Args:
        decomp: Decomposition whose component is resampled.
        which: `common` resamples each factor separately and maps them through the
            loadings; `idiosyncratic` and `raw` resample the n-vectors jointly.
        interval: (s, e), 1-based and inclusive.
        cfg: Bootstrap settings; `cfg.seed` and `replicate` select the streams.
        replicate: Replicate index m.
        template: Observed transformed panel, whose scales and mode are reused.
        trim: Trim width used when maximising over split points.
        statistic: Node statistic; the Double CUSUM by default.
    """
    s, e = interval
    if not 1 <= s < e <= decomp.T:
        raise LengthError(f"interval [{s}, {e}] is outside [1, {decomp.T}]")

    sample = draw_replicate(resample_source(decomp, which, cfg), cfg.seed, replicate)
    return statistic(template.transform_like(sample), s, e, trim)


class TreeNode(NamedTuple):
    level: int
    index: int
    start: int
    end: int


def grow_tree(
    panel: WaveletPanel,
    d_T: int,
    height: int,
    *,
    root: tuple[int, int] | None = None,
    min_gap: int | None = None,
) -> list[TreeNode]:
    """The DCBS tree without the stopping rule: every testable node is split at its
    Double CUSUM argmax, down to `height` levels.

    A node belongs to the tree when its level is at most `height` and it is long
    enough for DCBS to test it.
    """
    gap = max(d_T, min_gap or d_T)
    s0, e0 = root if root is not None else (panel.burn_in + 1, panel.T)

    nodes: list[TreeNode] = []
    queue = deque([TreeNode(1, 1, s0, e0)])
    while queue:
        node = queue.popleft()
        length = node.end - node.start + 1
        if node.level > height or length <= 4 * d_T or length <= 2 * gap:
            continue

        nodes.append(node)
        cusums = cusum(panel, node.start, node.end)
        if cusums.rows == 0:
            continue

        split = double_cusum(cusums, trim=gap).location
        u, v = node.level, node.index
        queue.append(TreeNode(u + 1, 2 * v - 1, node.start, split))
        queue.append(TreeNode(u + 1, 2 * v, split + 1, node.end))

    return nodes


@dataclass(frozen=True)
class ThresholdTree:
    """Bootstrap thresholds for the nodes of a DCBS tree."""

    nodes: tuple[TreeNode, ...]
    statistics: tuple[str, ...]
    """Names of the statistics evaluated on every replicate; the first is primary."""
    quantiles: Tensor
    """(nodes, statistics) matrix of (1 − alpha) quantiles."""
    alpha: float
    replicate_stats: Tensor | None = None
    """(R, nodes, statistics) replicate values when retained."""

    def __call__(self, s: int, e: int) -> float | None:
        return self.threshold(s, e)

    def threshold(self, s: int, e: int, statistic: str | None = None) -> float | None:
        """Threshold π for node [s, e], or None if the node is not in the tree."""
        col = self.statistics.index(statistic) if statistic is not None else 0
        for row, node in enumerate(self.nodes):
            if node.start == s and node.end == e:
                return self.quantiles[row, col].item()
        return None

    @property
    def thresholds(self) -> dict[tuple[int, int], float]:
        """Primary thresholds keyed by node interval."""
        return {
            (node.start, node.end): self.quantiles[i, 0].item()
            for i, node in enumerate(self.nodes)
        }


@dataclass(frozen=True)
class _ReplicateJob:
    source: ResampleSource
    template: WaveletPanel
    nodes: tuple[TreeNode, ...]
    trim: int
    seed: int
    statistics: tuple[Statistic, ...]


def _replicate_stats(job: _ReplicateJob, replicate: int) -> Tensor:
    sample = draw_replicate(job.source, job.seed, replicate)
    panel = job.template.transform_like(sample)
    return torch.tensor(
        [
            [stat(panel, node.start, node.end, job.trim) for stat in job.statistics]
            for node in job.nodes
        ],
        dtype=torch.float64,
    )


def _init_worker():
    # Replicates are the unit of parallelism
    torch.set_num_threads(1)


def build_threshold_tree(
    panel: WaveletPanel,
    decomp: FactorDecomposition | None,
    which: Component,
    cfg: SbConfig,
    d_T: int,
    *,
    root: tuple[int, int] | None = None,
    min_gap: int | None = None,
    statistics: Mapping[str, Statistic] | None = None,
    source: ResampleSource | None = None,
    workers: int = 1,
    progress: bool = False,
) -> ThresholdTree:
    """Grow the DCBS tree on the observed panel and attach bootstrap thresholds.

    Each replicate produces one resampled component and one transformed panel, on
    which the statistics of all nodes are evaluated before the next replicate is
    drawn.

    Args:
        panel: Observed transformed panel.
        decomp: Decomposition to resample; may be None when `source` is given.
        which: Component of `decomp` to resample.
        cfg: Bootstrap settings.
        d_T: Trim width.
        root: Interval at the root of the tree.
        min_gap: Optional larger trim.
        statistics: Named node statistics; Double CUSUM only by default.
        source: Explicit resampling plan, overriding `decomp` and `which`.
        workers: Number of worker processes for the replicates.
        progress: Show a progress bar.

    Returns:
        A tree whose thresholds do not depend on `workers`.
    """
    statistics = dict(statistics or {"dc": dc_statistic})
    nodes = tuple(
        grow_tree(panel, d_T, cfg.height(panel.T), root=root, min_gap=min_gap)
    )
    empty = torch.zeros(len(nodes), len(statistics), dtype=torch.float64)
    if not nodes:
        return ThresholdTree(nodes, tuple(statistics), empty, cfg.alpha)

    if source is None:
        if decomp is None:
            raise ValueError("either decomp or source must be given")
        source = resample_source(decomp, which, cfg)

    job = _ReplicateJob(
        source=source,
        template=panel,
        nodes=nodes,
        trim=max(d_T, min_gap or d_T),
        seed=cfg.seed,
        statistics=tuple(statistics.values()),
    )
    func = partial(_replicate_stats, job)
    replicates = range(cfg.replicates)
    bar = partial(tqdm, total=cfg.replicates, disable=not progress, leave=False)

    if workers > 1:
        ctx = mp.get_context("spawn")
        with ctx.Pool(workers, initializer=_init_worker) as pool:
            stats = list(bar(pool.imap(func, replicates, chunksize=4)))
    else:
        stats = list(bar(map(func, replicates)))

    stacked = torch.stack(stats)
    quantiles = stacked.quantile(1 - cfg.alpha, dim=0)
    return ThresholdTree(
        nodes=nodes,
        statistics=tuple(statistics),
        quantiles=quantiles,
        alpha=cfg.alpha,
        replicate_stats=stacked if cfg.retain_stats else None,
    )
