"""Visibility-reduced lattice stencils and their metrication overhead."""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np
from scipy.spatial import ConvexHull


@lru_cache(maxsize=None)
def stencil_offsets(m: int, R: int) -> np.ndarray:
    """Offsets ``o`` with ``0 < |o|_inf <= R`` and ``gcd(|o_k|) == 1``, lexicographic."""
    if R < 1:
        raise ValueError("stencil radius must be >= 1")
    offs = [o for o in itertools.product(range(-R, R + 1), repeat=m)
            if any(o) and math.gcd(*(abs(c) for c in o)) == 1]
    out = np.array(offs, dtype=np.int64)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def stencil_overhead(m: int, R: int) -> float:
    """Worst-case ratio minus one of stencil path length to Euclidean length.

    The cheapest stencil path to ``u`` costs the gauge of
    ``conv{o / |o|}`` at ``u``; its maximum on the unit sphere is the
    reciprocal of the smallest facet distance from the origin.
    """
    offs = stencil_offsets(m, R).astype(float)
    unit = offs / np.linalg.norm(offs, axis=1, keepdims=True)
    hull = ConvexHull(unit)
    dist = -hull.equations[:, -1]
    return float(1.0 / dist.min() - 1.0)
