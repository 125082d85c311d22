import math
from dataclasses import dataclass
from typing import Literal

from simple_parsing.helpers import Serializable, field

from ..bootstrap import SbConfig
from ..errors import ConfigError
from ..factor import CapConstant
from ..wavelet import WaveletConfig

Capping = Literal["disabled", "auto", "fixed"]


@dataclass
class DetectConfig(Serializable):
    wavelet: WaveletConfig = field(default_factory=WaveletConfig)
    """How components are turned into transformed panels."""

    bootstrap: SbConfig = field(default_factory=SbConfig)
    """Threshold selection."""

    capping: Capping = "disabled"
    """Eigenvector capping in the factor decomposition. `auto` derives c_w from the
    screening lower bound; `fixed` uses `cap_constant`."""

    cap_constant: float | None = None
    """c_w for `capping=fixed`."""

    d_T: int | None = field(default=None, alias=["--d-T"])
    """Trim width. Defaults to ⌊min(log²T, 0.25 · T^{6/7})⌋."""

    trim_log_base: float = math.e
    """Base of the logarithm in the default trim width."""

    min_gap: int | None = field(default=None, alias=["--min-gap"])
    """Smallest allowed distance between change-points; at least d_T."""

    sequential_scales: bool = field(default=False, alias=["--sequential-scales"])
    """Segment at scale −1 first and refine the segments with coarser scales, instead
    of using all scales at once."""

    candidates: tuple[int, ...] = ()
    """Factor numbers to screen. Defaults to the information-criterion range."""

    r_upper: int | None = None
    """Upper end of the screening range. Defaults to max(20, ⌊√(n ∧ T)⌋), at most
    n − 1."""

    ic_exponent: float = 2.0
    """Exponent a of the log term in the segment information criterion."""

    c_grid: tuple[float, ...] = (0.5, 0.6, 0.7, 0.8, 0.9, 0.95)
    """Variance fractions c for the k_b(c) table."""

    keep_profiles: bool = True
    """Record the per-b Double CUSUM curve of every examined node."""

    def __post_init__(self):
        if self.capping == "fixed":
            if self.cap_constant is None or not self.cap_constant > 0:
                raise ConfigError("capping=fixed needs a positive cap_constant")
        if self.d_T is not None and self.d_T < 1:
            raise ConfigError("d_T must be at least 1")
        if self.min_gap is not None and self.min_gap < 1:
            raise ConfigError("min_gap must be at least 1")
        if not self.trim_log_base > 1:
            raise ConfigError("trim_log_base must exceed 1")
        if any(k < 1 for k in self.candidates):
            raise ConfigError("factor number candidates must be positive")
        if self.r_upper is not None and self.r_upper < 1:
            raise ConfigError("r_upper must be at least 1")
        if any(not 0 < c < 1 for c in self.c_grid):
            raise ConfigError("every c in c_grid must lie in (0, 1)")

    @property
    def cap(self) -> CapConstant:
        if self.capping == "auto":
            return "auto"
        if self.capping == "fixed":
            assert self.cap_constant is not None
            return self.cap_constant
        return math.inf
