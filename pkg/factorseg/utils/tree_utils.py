"""Helpers for mapping over nested containers of tensors.

Reports are assembled from dataclasses holding tensors, tuples and dicts keyed by
integers. Before they can be written as JSON every leaf has to become a plain Python
scalar, and every key a string.
"""

import math
from pathlib import PurePath
from typing import Any, Callable, Mapping, TypeVar

import numpy as np
from torch import Tensor

TreeType = TypeVar("TreeType")


def pytree_map(func: Callable, tree: TreeType) -> TreeType:
    """
    Recursively apply a function to all leaves of a nested container, returning the
    results in a new container with the same structure.

    Examples:
    >>> pytree_map(lambda x: x + 1, {"x": 7, "y": (1, [2])})
    {'x': 8, 'y': (2, [3])}
    """
    if isinstance(tree, Mapping):
        return {k: pytree_map(func, v) for k, v in tree.items()}  # type: ignore

    if isinstance(tree, list):
        return [pytree_map(func, v) for v in tree]  # type: ignore

    if isinstance(tree, tuple):
        return tuple(pytree_map(func, v) for v in tree)  # type: ignore

    return func(tree)


def _to_builtin_leaf(x: Any) -> Any:
    if isinstance(x, Tensor):
        return x.tolist()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, np.generic):
        return x.item()
    if isinstance(x, PurePath):
        return str(x)
    if isinstance(x, float) and not math.isfinite(x):
        # JSON has no infinities; the reader maps None back where it matters
        return None
    return x


def to_builtin(tree: Any) -> Any:
    """Convert a nested container to JSON-compatible builtins.

    Tensors and numpy arrays become (nested) lists, tuples become lists and mapping
    keys become strings.
    """
    if isinstance(tree, Mapping):
        return {str(k): to_builtin(v) for k, v in tree.items()}
    if isinstance(tree, (list, tuple)):
        return [to_builtin(v) for v in tree]

    return pytree_map(_to_builtin_leaf, tree)
