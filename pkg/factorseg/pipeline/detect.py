"""Two-stage change-point detection: common components first, screened over the
factor number, then the idiosyncratic components at the selected k*."""

import logging
from dataclasses import dataclass, replace

from torch import Tensor
from tqdm import tqdm

from ..bootstrap import (
    Component,
    ResampleSource,
    build_threshold_tree,
    resample_source,
)
from ..errors import DimensionError, LengthError
from ..factor import FactorDecomposition, decompose
from ..panel import TimeSeriesPanel, center
from ..segment import ChangePointSet, dcbs, default_trim
from ..utils import substream_seed
from ..wavelet import WaveletPanel, build_panel, scale_count
from .config import DetectConfig
from .report import DetectionReport, SegmentRecord
from .screening import screening_range
from .segments import classify_break, kbc_table, segment_analysis

# Seed roles for the two stages
_COMMON, _IDIO = 0, 1


@dataclass(frozen=True)
class ComponentDetector:
    """Runs bootstrap-calibrated DCBS on one component of a panel."""

    cfg: DetectConfig
    J_star: int
    d_T: int
    gap: int
    workers: int = 1
    progress: bool = False

    def __call__(
        self,
        source: Tensor,
        which: Component,
        seed: int,
        *,
        decomp: FactorDecomposition | None = None,
        plan: ResampleSource | None = None,
    ) -> ChangePointSet:
        """Change-points of the (n, T) matrix `source`.

        Args:
            source: Component to segment.
            which: Label of the component; also selects the resampling scheme when
                `plan` is omitted.
            seed: Root seed of this run's bootstrap.
            decomp: Decomposition `source` was taken from.
            plan: Explicit resampling plan, e.g. for a known true component.
        """
        if plan is None:
            if decomp is None:
                raise ValueError("either decomp or plan must be given")
            plan = resample_source(decomp, which, self.cfg.bootstrap)

        wavelet = self.cfg.wavelet
        panel = build_panel(
            source,
            self.J_star,
            wavelet.mode,
            boundary=wavelet.boundary,
            max_rows=wavelet.max_rows,
            source_kind=which,
        )
        if self.cfg.sequential_scales:
            return self._sequential(panel, which, plan, seed)
        return self._segment(panel, which, plan, seed)

    def _segment(
        self,
        panel: WaveletPanel,
        which: Component,
        plan: ResampleSource,
        seed: int,
        root: tuple[int, int] | None = None,
    ) -> ChangePointSet:
        sb = replace(self.cfg.bootstrap, seed=seed)
        tree = build_threshold_tree(
            panel,
            None,
            which,
            sb,
            self.d_T,
            root=root,
            min_gap=self.gap,
            source=plan,
            workers=self.workers,
            progress=self.progress,
        )
        return dcbs(
            panel,
            tree,
            self.d_T,
            sb.height(panel.T),
            min_gap=self.gap,
            root=root,
            keep_profiles=self.cfg.keep_profiles,
        )

    def _sequential(
        self, panel: WaveletPanel, which: Component, plan: ResampleSource, seed: int
    ) -> ChangePointSet:
        """Segment at the finest scale, then refine each segment one scale coarser at
        a time until a scale adds nothing."""
        found: ChangePointSet | None = None
        for depth, j in enumerate(panel.scales):
            sub = panel.select_scale(j)
            if found is None:
                found = self._segment(sub, which, plan, substream_seed(seed, depth, 0))
                continue

            first = sub.burn_in + 1
            cuts = [first - 1, *found.locations, sub.T]
            added = 0
            for v, (s, e) in enumerate(zip(cuts[:-1], cuts[1:])):
                part = self._segment(
                    sub, which, plan, substream_seed(seed, depth, v), root=(s + 1, e)
                )
                added += len(part)
                found = found.merged(part)

            logging.debug(f"Scale {j} added {added} change-points")
            if not added:
                break

        assert found is not None
        return found


def _segments(
    panel: TimeSeriesPanel, points: ChangePointSet, cfg: DetectConfig
) -> list[SegmentRecord]:
    fits = segment_analysis(panel, points.locations, exponent=cfg.ic_exponent)

    records = []
    for b, fit in enumerate(fits):
        label = None
        if b > 0 and fit.r_hat is not None and fits[b - 1].r_hat is not None:
            left = fits[b - 1]
            try:
                label = classify_break(
                    panel,
                    (left.start, left.end),
                    (fit.start, fit.end),
                    exponent=cfg.ic_exponent,
                )
            except LengthError as err:
                logging.info(f"Break at {left.end} not classified: {err}")
        records.append(SegmentRecord(fit.start, fit.end, fit.r_hat, label, fit.skipped))

    return records


def detect(
    panel: TimeSeriesPanel,
    cfg: DetectConfig | None = None,
    *,
    workers: int = 1,
    progress: bool = False,
) -> DetectionReport:
    """Detect and attribute change-points in the second-order structure of a panel.

    For every factor number k in the screening range, the common component of the
    k-factor decomposition is segmented. k* is the largest k attaining the largest
    number of change-points. The idiosyncratic component at k* is segmented next,
    and the segments between common change-points are analysed.

    Args:
        panel: Observed panel; centered here if it is not already.
        cfg: Pipeline settings.
        workers: Worker processes for the bootstrap replicates.
        progress: Show progress bars.

    Returns:
        The full report. Bootstrap seeds are derived from (seed, k, stage), so the
        result depends only on the panel and `cfg`.
    """
    cfg = cfg or DetectConfig()
    if not panel.centered:
        panel = center(panel)

    T = panel.T
    J_star = scale_count(T, cfg.wavelet.scale_constant, cfg.wavelet.scale_exponent)
    d_T = cfg.d_T if cfg.d_T is not None else default_trim(T, cfg.trim_log_base)
    gap = max(d_T, cfg.min_gap or d_T)

    screening = screening_range(panel, cfg.r_upper)
    candidates = cfg.candidates or screening.candidates
    if max(candidates) >= panel.n:
        raise DimensionError(f"factor numbers must be below n = {panel.n}")

    run = ComponentDetector(cfg, J_star, d_T, gap, workers, progress)
    seed = cfg.bootstrap.seed

    decomps: dict[int, FactorDecomposition] = {}
    per_k: dict[int, ChangePointSet] = {}
    for k in tqdm(candidates, desc="Screening k", disable=not progress):
        decomps[k] = decompose(panel, k, cfg.cap, r_lower=screening.r_lower)
        per_k[k] = run(
            decomps[k].common,
            "common",
            substream_seed(seed, k, _COMMON),
            decomp=decomps[k],
        )
        logging.info(f"k={k}: common change-points {per_k[k].locations}")

    # Ties go to the largest k
    most = max(len(points) for points in per_k.values())
    k_star = max(k for k, points in per_k.items() if len(points) == most)

    decomp = decomps[k_star]
    idio = run(
        decomp.idiosyncratic,
        "idiosyncratic",
        substream_seed(seed, k_star, _IDIO),
        decomp=decomp,
    )
    logging.info(f"k*={k_star}; idiosyncratic change-points {idio.locations}")

    common = per_k[k_star]
    return DetectionReport(
        config=cfg.to_dict(),
        n=panel.n,
        T=T,
        J_star=J_star,
        d_T=d_T,
        min_gap=gap,
        screening=screening,
        per_k=per_k,
        k_star=k_star,
        common_points=common,
        idio_points=idio,
        segments=_segments(panel, common, cfg),
        kbc=kbc_table(panel, common.locations, cfg.c_grid),
    )
