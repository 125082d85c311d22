from dataclasses import dataclass
from typing import Sequence

import torch
from torch import Tensor


@dataclass(frozen=True)
class RateResult:
    """Detection rate point estimate and confidence interval."""

    estimate: float
    """Fraction of trials with a detection."""
    lower: float
    """Lower bound of the confidence interval."""
    upper: float
    """Upper bound of the confidence interval."""


def detection_rate_ci(
    hits: Tensor,
    *,
    num_samples: int = 1000,
    level: float = 0.95,
    seed: int = 42,
) -> RateResult:
    """Bootstrap confidence interval for a detection rate.

    Args:
        hits: Boolean tensor of shape `(N,)`, one entry per trial.
        num_samples (int): Number of bootstrap samples to use.
        level (float): Confidence level of the confidence interval.
        seed (int): Random seed for reproducibility.
    """
    if hits.dim() != 1 or len(hits) == 0:
        raise ValueError("hits should be a non-empty 1D tensor")

    N = hits.shape[0]
    rng = torch.Generator().manual_seed(seed)
    indices = torch.randint(0, N, (num_samples, N), generator=rng)
    rates = hits[indices].double().mean(1)

    alpha = (1 - level) / 2
    q = rates.new_tensor([alpha, 1 - alpha])
    lower, upper = rates.quantile(q).tolist()
    return RateResult(hits.double().mean().item(), lower, upper)


def location_error(estimate: int | None, truth: int | None) -> float:
    """|η̂ − η|, or NaN when either side is missing."""
    if estimate is None or truth is None:
        return float("nan")
    return float(abs(estimate - truth))


def match_breaks(
    estimates: Sequence[int], truth: Sequence[int], tolerance: int
) -> list[bool]:
    """For each true break, whether a distinct estimate lies within `tolerance`.

    True breaks are matched in order to the nearest unused estimate.
    """
    unused = sorted(estimates)
    found = []
    for eta in truth:
        near = [e for e in unused if abs(e - eta) <= tolerance]
        if not near:
            found.append(False)
            continue

        best = min(near, key=lambda e: (abs(e - eta), e))
        unused.remove(best)
        found.append(True)
    return found


def exact_recovery(
    estimates: Sequence[int], truth: Sequence[int], tolerance: int
) -> bool:
    """Exactly one estimate within `tolerance` of every true break and no others."""
    return len(estimates) == len(truth) and all(
        match_breaks(estimates, truth, tolerance)
    )
