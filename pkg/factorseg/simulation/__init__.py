from .baselines import BaselineStats, avg_statistic, baseline_reducers, max_statistic
from .benchmark import BenchmarkGrid, Trial, TrialResult, run_trial
from .scenarios import Break, GeneratedDataset, ScenarioSpec, generate, theta_scale

__all__ = [
    "avg_statistic",
    "BaselineStats",
    "baseline_reducers",
    "BenchmarkGrid",
    "Break",
    "GeneratedDataset",
    "generate",
    "max_statistic",
    "run_trial",
    "ScenarioSpec",
    "theta_scale",
    "Trial",
    "TrialResult",
]
