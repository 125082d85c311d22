import numpy as np
import torch
from torch import Tensor


def as_float64(x: Tensor | np.ndarray | list) -> Tensor:
    """Convert array-like input to a float64 CPU tensor without copying if possible."""
    if isinstance(x, Tensor):
        return x.to(device="cpu", dtype=torch.float64)

    return torch.as_tensor(np.asarray(x, dtype=np.float64))
