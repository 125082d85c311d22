"""Monte Carlo sweeps comparing the Double CUSUM test with MAX, AVG and DC-NFA."""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, fields, replace
from functools import partial
from itertools import product
from pathlib import Path
from typing import Any, Iterable, NamedTuple

import pandas as pd
import torch
import torch.multiprocessing as mp
import yaml
from rich.console import Console
from simple_parsing.helpers import Serializable, field
from torch import Tensor
from tqdm import tqdm

from ..bootstrap import (
    Component,
    ResampleSource,
    Statistic,
    build_threshold_tree,
    joint_source,
    resample_source,
)
from ..errors import ConfigError
from ..factor import FactorDecomposition, decompose
from ..files import benchmark_dir
from ..metrics import detection_rate_ci, exact_recovery, location_error, match_breaks
from ..panel import center
from ..pipeline import ComponentDetector, DetectConfig, detect, screening_range
from ..reporting.visualize import render_table
from ..run import Run
from ..segment import cusum, dc_statistic, default_trim, double_cusum
from ..utils import substream_seed
from ..wavelet import build_panel, scale_count
from .baselines import avg_statistic, baseline_reducers, max_statistic
from .scenarios import GeneratedDataset, Scenario, ScenarioSpec, generate

CELL = ["scenario", "n", "T", "phi", "sigma", "varrho"]
TESTS: dict[str, Statistic] = {
    "DC": dc_statistic,
    "MAX": max_statistic,
    "AVG": avg_statistic,
}
MULTI_BREAK = ("M1", "M2")

# Seed roles within one trial
_COMMON, _IDIO, _RAW, _ORACLE = range(4)


@dataclass
class BenchmarkGrid(Serializable):
    scenarios: list[Scenario] = field(default_factory=lambda: ["null"])
    """Scenarios to sweep."""

    n: int = 50
    T: int = 200
    q: int = 5

    phi: list[float] = field(default_factory=lambda: [1.0])
    """Idiosyncratic-to-common variance ratios."""

    sigma: list[float] = field(default_factory=lambda: [math.sqrt(2)])
    """Break magnitudes."""

    varrho: list[float] = field(default_factory=lambda: [1.0])
    """Fractions of affected series."""

    break_fraction: float = 1 / 3

    seeds: int = 5
    """Trials per cell."""

    first_seed: int = 0

    tolerance: int = 15
    """Largest |η̂ − η| counted as recovering a break in multi-break scenarios."""

    detect: DetectConfig = field(default_factory=DetectConfig)

    def __post_init__(self):
        if not self.scenarios:
            raise ConfigError("the grid needs at least one scenario")
        if not (self.phi and self.sigma and self.varrho):
            raise ConfigError("phi, sigma and varrho need at least one value each")
        if self.seeds < 1 or self.first_seed < 0:
            raise ConfigError("need seeds ≥ 1 and first_seed ≥ 0")
        if self.tolerance < 0:
            raise ConfigError("tolerance must be non-negative")

    @classmethod
    def from_yaml(cls, path: Path) -> "BenchmarkGrid":
        """Load a grid, rejecting keys that are not grid fields."""
        with open(path) as f:
            raw = yaml.safe_load(f) or {}
        if not isinstance(raw, dict):
            raise ConfigError(f"{path} does not hold a mapping")

        unknown = set(raw) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown grid keys: {', '.join(sorted(unknown))}")
        return cls.from_dict(raw)

    def specs(self) -> list[ScenarioSpec]:
        """One spec per (cell, seed), in output order."""
        return [
            ScenarioSpec(
                scenario=scenario,
                n=self.n,
                T=self.T,
                q=self.q,
                phi=phi,
                sigma=sigma,
                varrho=varrho,
                break_fraction=self.break_fraction,
                seed=seed,
            )
            for scenario, phi, sigma, varrho, seed in product(
                self.scenarios,
                self.phi,
                self.sigma,
                self.varrho,
                range(self.first_seed, self.first_seed + self.seeds),
            )
        ]


class TrialResult(NamedTuple):
    power: list[dict[str, Any]]
    locations: list[dict[str, Any]]
    multiplicity: list[dict[str, Any]]


@dataclass(frozen=True)
class Trial:
    spec: ScenarioSpec
    cfg: DetectConfig
    tolerance: int

    @property
    def cell(self) -> dict[str, Any]:
        spec = self.spec
        return dict(
            scenario=spec.scenario,
            n=spec.n,
            T=spec.T,
            phi=spec.phi,
            sigma=spec.sigma,
            varrho=spec.varrho,
            seed=spec.seed,
        )

    def seed(self, *keys: int) -> int:
        return substream_seed(self.cfg.bootstrap.seed, self.spec.seed, *keys)


class _Rows:
    """Accumulates the tidy rows of one trial."""

    def __init__(self, trial: Trial):
        self.cell = trial.cell
        self.power: list[dict[str, Any]] = []
        self.locations: list[dict[str, Any]] = []
        self.multiplicity: list[dict[str, Any]] = []

    def detection(
        self,
        test: str,
        component: str,
        hit: bool,
        where: int | None,
        truth: int | None,
        k_star: int | None,
    ):
        self.power.append(
            dict(
                **self.cell,
                test=test,
                component=component,
                detected=hit,
                location=where,
                truth=truth,
                error=location_error(where, truth),
                k_star=k_star,
            )
        )

    def estimates(self, test: str, component: str, points: list[int]):
        self.locations.extend(
            dict(**self.cell, test=test, component=component, location=p)
            for p in points
        )

    def recovery(
        self, test: str, component: str, points: list[int], truth: list[int], tol: int
    ):
        exact = exact_recovery(points, truth, tol)
        for eta, found in zip(truth, match_breaks(points, truth, tol)):
            self.multiplicity.append(
                dict(
                    **self.cell,
                    test=test,
                    component=component,
                    truth=eta,
                    recovered=found,
                    count=len(points),
                    exact_recovery=exact,
                )
            )

    def result(self) -> TrialResult:
        return TrialResult(self.power, self.locations, self.multiplicity)


def _first(points: list[int]) -> int | None:
    return points[0] if points else None


def root_tests(
    source: Tensor,
    which: Component,
    plan: ResampleSource,
    cfg: DetectConfig,
    seed: int,
) -> dict[str, tuple[bool, int | None]]:
    """Test the whole sample once with every reducer in `TESTS`.

    Returns:
        Map from test name to (rejected, estimated location). The location is None
        when the test does not reject.
    """
    T = source.shape[1]
    wavelet = cfg.wavelet
    J_star = scale_count(T, wavelet.scale_constant, wavelet.scale_exponent)
    d_T = cfg.d_T if cfg.d_T is not None else default_trim(T, cfg.trim_log_base)
    gap = max(d_T, cfg.min_gap or d_T)

    panel = build_panel(
        source,
        J_star,
        wavelet.mode,
        boundary=wavelet.boundary,
        max_rows=wavelet.max_rows,
        source_kind=which,
    )
    sb = replace(cfg.bootstrap, tree_height=1, seed=seed)
    tree = build_threshold_tree(
        panel, None, which, sb, d_T, min_gap=gap, statistics=TESTS, source=plan
    )
    missed: dict[str, tuple[bool, int | None]] = {name: (False, None) for name in TESTS}
    if not tree.nodes:
        return missed

    s, e = tree.nodes[0].start, tree.nodes[0].end
    cusums = cusum(panel, s, e)
    if cusums.rows == 0:
        return missed

    dc = double_cusum(cusums, gap)
    base = baseline_reducers(cusums, gap)
    observed = {
        "DC": (dc.statistic, dc.location),
        "MAX": (base.max, base.max_location),
        "AVG": (base.avg, base.avg_location),
    }

    out = {}
    for name, (stat, location) in observed.items():
        threshold = tree.threshold(s, e, name)
        rejected = threshold is not None and stat > threshold
        out[name] = (rejected, location if rejected else None)
    return out


def _component_tests(
    decomp: FactorDecomposition, which: Component, cfg: DetectConfig, seed: int
) -> dict[str, tuple[bool, int | None]]:
    source = decomp.common if which == "common" else decomp.idiosyncratic
    plan = resample_source(decomp, which, cfg.bootstrap)
    return root_tests(source, which, plan, cfg, seed)


def single_break_trial(trial: Trial, data: GeneratedDataset) -> TrialResult:
    """First-iteration tests over the screened factor numbers.

    A test detects a common break when it rejects for some k, and its location is
    read at the largest such k. The idiosyncratic tests run at the DC choice of k.
    """
    cfg = trial.cfg
    panel = center(data.panel)
    screening = screening_range(panel, cfg.r_upper)
    candidates = cfg.candidates or screening.candidates

    decomps: dict[int, FactorDecomposition] = {}
    per_k: dict[int, dict[str, tuple[bool, int | None]]] = {}
    for k in candidates:
        decomps[k] = decompose(panel, k, cfg.cap, r_lower=screening.r_lower)
        per_k[k] = _component_tests(
            decomps[k], "common", cfg, trial.seed(k, _COMMON)
        )

    rows = _Rows(trial)
    common_truth = _first(data.breaks("common"))
    k_stars = {}
    for name in TESTS:
        rejecting = [k for k in candidates if per_k[k][name][0]]
        k_stars[name] = max(rejecting) if rejecting else max(candidates)
        hit, where = per_k[k_stars[name]][name]
        rows.detection(name, "common", hit, where, common_truth, k_stars[name])
        rows.estimates(name, "common", [where] if where is not None else [])

    k_star = k_stars["DC"]
    idio = _component_tests(
        decomps[k_star], "idiosyncratic", cfg, trial.seed(k_star, _IDIO)
    )
    idio_truth = _first(data.breaks("idiosyncratic"))
    for name, (hit, where) in idio.items():
        rows.detection(name, "idiosyncratic", hit, where, idio_truth, k_star)
        rows.estimates(name, "idiosyncratic", [where] if where is not None else [])

    # DC-NFA: the same test on the raw panel, without factor analysis
    raw = panel.values
    hit, where = root_tests(
        raw, "raw", joint_source(raw, cfg.bootstrap), cfg, trial.seed(0, _RAW)
    )["DC"]
    any_truth = _first([b.location for b in data.truth])
    rows.detection("DC-NFA", "raw", hit, where, any_truth, None)
    rows.estimates("DC-NFA", "raw", [where] if where is not None else [])

    return rows.result()


def multi_break_trial(trial: Trial, data: GeneratedDataset) -> TrialResult:
    """Full detection, plus DCBS on the true components as an oracle."""
    cfg = trial.cfg
    panel = center(data.panel)
    report = detect(panel, replace(cfg, keep_profiles=False))

    oracle = ComponentDetector(
        replace(cfg, keep_profiles=False), report.J_star, report.d_T, report.min_gap
    )
    true_parts: dict[Component, Tensor] = {
        "common": data.true_common,
        "idiosyncratic": data.idio_scale * data.true_idio,
    }
    found = {
        "common": report.common_points.locations,
        "idiosyncratic": report.idio_points.locations,
    }

    rows = _Rows(trial)
    for v, (which, part) in enumerate(true_parts.items()):
        plan = joint_source(part - part.mean(dim=1, keepdim=True), cfg.bootstrap)
        points = oracle(part, which, trial.seed(v, _ORACLE), plan=plan).locations
        truth = data.breaks(which)

        for test, estimates in (("DC", found[which]), ("DC-oracle", points)):
            k = report.k_star if test == "DC" else None
            where = _first(estimates)
            rows.detection(test, which, bool(estimates), where, _first(truth), k)
            rows.estimates(test, which, estimates)
            rows.recovery(test, which, estimates, truth, trial.tolerance)

    return rows.result()


def run_trial(trial: Trial) -> TrialResult:
    data = generate(trial.spec)
    if trial.spec.scenario in MULTI_BREAK:
        return multi_break_trial(trial, data)
    return single_break_trial(trial, data)


def _init_worker():
    # Trials are the unit of parallelism
    torch.set_num_threads(1)


def power_table(trials: pd.DataFrame) -> pd.DataFrame:
    """Detection rate with a bootstrap interval and median location error per cell,
    test and component."""
    records = []
    for key, group in trials.groupby(CELL + ["test", "component"], sort=True):
        rate = detection_rate_ci(torch.tensor(group["detected"].tolist()))
        records.append(
            dict(
                zip(CELL + ["test", "component"], key),
                trials=len(group),
                detection_rate=rate.estimate,
                rate_lower=rate.lower,
                rate_upper=rate.upper,
                median_error=group["error"].median(),
            )
        )
    return pd.DataFrame.from_records(records)


def multiplicity_table(rows: pd.DataFrame) -> pd.DataFrame:
    """Per true break, how often it was recovered, with the mean number of
    estimates and the exact recovery rate."""
    keys = CELL + ["test", "component", "truth"]
    return (
        rows.groupby(keys, sort=True)
        .agg(
            recovery_rate=("recovered", "mean"),
            mean_count=("count", "mean"),
            exact_recovery_rate=("exact_recovery", "mean"),
        )
        .reset_index()
    )


@dataclass
class Benchmark(Run):
    """Sweep scenarios and seeds, and tabulate detection power and accuracy."""

    grid: Path | None = None
    """YAML file describing the sweep."""

    def validate(self) -> None:
        if self.grid is None:
            raise ConfigError("a grid file is required (--grid)")
        if not self.grid.is_file():
            raise FileNotFoundError(f"grid file not found: {self.grid}")
        self.load_grid()

    def load_grid(self) -> BenchmarkGrid:
        assert self.grid is not None
        return BenchmarkGrid.from_yaml(self.grid)

    @property
    def runs_dir(self) -> Path:
        return benchmark_dir()

    def apply(self, out_dir: Path) -> None:
        grid = self.load_grid()
        trials = [Trial(spec, grid.detect, grid.tolerance) for spec in grid.specs()]
        logging.info(f"Running {len(trials)} trials")

        buffers: dict[str, list[dict[str, Any]]] = defaultdict(list)
        bar = partial(tqdm, total=len(trials))
        workers = self.num_workers
        try:
            if workers > 1:
                ctx = mp.get_context("spawn")
                with ctx.Pool(workers, initializer=_init_worker) as pool:
                    results = bar(pool.imap(run_trial, trials, chunksize=1))
                    self.collect(results, buffers)
            else:
                self.collect(bar(map(run_trial, trials)), buffers)
        finally:
            # Write whatever finished, even if we crash or get interrupted
            self.write_tables(buffers, out_dir)

    @staticmethod
    def collect(
        results: Iterable[TrialResult], buffers: dict[str, list[dict[str, Any]]]
    ) -> None:
        for result in results:
            for name, rows in result._asdict().items():
                buffers[name].extend(rows)

    def write_tables(
        self, buffers: dict[str, list[dict[str, Any]]], out_dir: Path
    ) -> None:
        order = ["scenario", "phi", "sigma", "varrho", "seed"]
        frames = {
            name: pd.DataFrame.from_records(rows).sort_values(
                by=order, kind="stable"
            )
            for name, rows in buffers.items()
            if rows
        }
        if "power" in frames:
            frames["trials"] = frames.pop("power")
            frames["power"] = power_table(frames["trials"])
        if "multiplicity" in frames:
            frames["multiplicity"] = multiplicity_table(frames["multiplicity"])

        for name, df in frames.items():
            df.round(4).to_csv(out_dir / f"{name}.csv", index=False)

        if "power" in frames:
            df = frames["power"]
            table = render_table(
                "Detection rates",
                CELL + ["test", "component", "rate", "median |error|"],
                df[CELL + ["test", "component", "detection_rate", "median_error"]]
                .itertuples(index=False),
            )
            Console().print(table)
