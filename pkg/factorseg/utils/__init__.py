from .math_util import autocovariance, generator, substream_seed, trapezoid_taper
from .pretty import Color, bold, colorize, format_points, pretty_error
from .tree_utils import pytree_map, to_builtin
from .typing import as_float64

__all__ = [
    "as_float64",
    "autocovariance",
    "bold",
    "Color",
    "colorize",
    "format_points",
    "generator",
    "pretty_error",
    "pytree_map",
    "substream_seed",
    "to_builtin",
    "trapezoid_taper",
]
