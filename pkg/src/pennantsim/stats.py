"""Small statistical helpers shared across modules."""

from __future__ import annotations

import math

import numpy as np


def nearest_rank_quantile(values, q: float) -> float:
    """Nearest-rank quantile: the value at rank ceil(q * n) of the sorted data.

    Always returns an element of `values` (no interpolation). q=0 maps to the
    minimum, q=1 to the maximum.
    """
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile level out of [0, 1]: {q}")
    arr = np.sort(np.asarray(values, dtype=float))
    if arr.size == 0:
        raise ValueError("cannot take a quantile of an empty sequence")
    rank = math.ceil(q * arr.size)
    rank = min(max(rank, 1), arr.size)
    return float(arr[rank - 1])
