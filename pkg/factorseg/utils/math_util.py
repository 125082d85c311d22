import numpy as np
import torch
from torch import Tensor


def substream_seed(seed: int, *keys: int) -> int:
    """Derive an independent 63-bit seed from a root seed and a path of integer keys.

    The mapping is a pure function of its arguments, so a replicate computed in any
    worker process, in any order, sees the same random numbers.
    """
    if seed < 0 or any(k < 0 for k in keys):
        raise ValueError("seeds and substream keys must be non-negative")

    seq = np.random.SeedSequence(entropy=seed, spawn_key=tuple(keys))
    state = seq.generate_state(1, dtype=np.uint64)[0]
    return int(state) & ((1 << 63) - 1)


def generator(seed: int, *keys: int) -> torch.Generator:
    """A CPU `torch.Generator` seeded from `substream_seed(seed, *keys)`."""
    return torch.Generator().manual_seed(substream_seed(seed, *keys))


def autocovariance(x: Tensor, max_lag: int) -> Tensor:
    """Sample autocovariances R(0), ..., R(max_lag) of a 1D series.

    Uses the biased estimator T⁻¹ Σ (x_t − x̄)(x_{t+k} − x̄), which keeps the
    sequence positive semi-definite.
    """
    if x.dim() != 1:
        raise ValueError("autocovariance expects a 1D tensor")

    T = len(x)
    xc = x - x.mean()
    lags = range(min(max_lag, T - 1) + 1)
    return torch.stack([xc[: T - k] @ xc[k:] for k in lags]) / T


def trapezoid_taper(z: Tensor) -> Tensor:
    """Flat-top trapezoidal lag window: 1 on |z| < 1/2, 2(1 − |z|) up to 1, else 0."""
    a = z.abs()
    return torch.where(a < 0.5, torch.ones_like(a), (2 * (1 - a)).clamp(min=0.0))
