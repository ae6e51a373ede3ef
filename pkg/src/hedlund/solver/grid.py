"""Implicit lattice graph over the cover with periodic edge weights."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..metric import grid_points
from .stencil import stencil_offsets, stencil_overhead

# composite Gauss-Legendre rule for edges that may enter a tube
GL_SUBINTERVALS = 4
GL_ORDER = 5
DEFAULT_BUDGET = 30_000_000
# part of the grid cache key; bump when edge weights change
QUADRATURE = f"gauss-legendre-{GL_ORDER}-adaptive"


@dataclass(frozen=True)
class CoverBox:
    """Axis-aligned block of unit cells ``[lo, hi]`` sampled at ``res`` nodes per unit."""

    lo: tuple[int, ...]
    hi: tuple[int, ...]
    res: int
    R: int = 2

    def __post_init__(self):
        if any(h <= l for l, h in zip(self.lo, self.hi)):
            raise ValueError(f"empty box {self.lo}..{self.hi}")

    @property
    def h(self) -> float:
        return 1.0 / self.res

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple((h - l) * self.res + 1 for l, h in zip(self.lo, self.hi))

    @property
    def origin(self) -> np.ndarray:
        return np.array(self.lo, dtype=np.int64) * self.res

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def contains_node(self, G) -> bool:
        idx = np.asarray(G) - self.origin
        return bool(np.all(idx >= 0) and np.all(idx < np.array(self.shape)))

    def node_index(self, G) -> np.ndarray:
        """Flat index of global node coordinates ``G`` (``(..., m)`` ints)."""
        idx = np.asarray(G, dtype=np.int64) - self.origin
        return np.ravel_multi_index(np.moveaxis(idx, -1, 0), self.shape)

    def node_coords(self, flat) -> np.ndarray:
        idx = np.stack(np.unravel_index(np.asarray(flat), self.shape), axis=-1)
        return idx + self.origin

    def points(self, flat) -> np.ndarray:
        return self.node_coords(flat) / self.res

    def on_boundary(self, flat) -> np.ndarray:
        idx = np.stack(np.unravel_index(np.asarray(flat), self.shape), axis=-1)
        return np.any((idx == 0) | (idx == np.array(self.shape) - 1), axis=-1)

    @classmethod
    def around(cls, G_points, res: int, R: int, padding: int) -> "CoverBox":
        """Smallest cell-aligned box containing the nodes, padded by ``padding`` cells."""
        G = np.atleast_2d(np.asarray(G_points, dtype=np.int64))
        lo = np.floor_divide(G.min(axis=0), res) - padding
        hi = -np.floor_divide(-G.max(axis=0), res) + padding
        hi = np.maximum(hi, lo + 1)
        return cls(tuple(int(c) for c in lo), tuple(int(c) for c in hi), res, R)


def _gl_rule(sub: int = GL_SUBINTERVALS):
    x, w = np.polynomial.legendre.leggauss(GL_ORDER)
    k = np.arange(sub)
    nodes = ((k[:, None] + (x[None, :] + 1) / 2) / sub).ravel()
    weights = np.tile(w / 2 / sub, sub)
    return nodes, weights


def gl_subintervals(length: float, feature_scale: float) -> int:
    """Panels for an edge: at least four, and none longer than a quarter of the tube annulus."""
    if not math.isfinite(feature_scale):
        return GL_SUBINTERVALS
    return max(GL_SUBINTERVALS, math.ceil(length / (feature_scale / 4)))


def edge_weight_table(metric, res: int, R: int) -> np.ndarray:
    """Weights ``w[local, k]`` of the edge from node ``local / res`` along offset ``k``.

    Exact trapezoid where the length factor is constant along the edge,
    composite Gauss-Legendre elsewhere. Opposite offsets reuse the same
    integral, so the graph is exactly undirected.
    """
    m = metric.dim
    offs = stencil_offsets(m, R)
    noff = len(offs)
    pts = grid_points(res, m)
    nloc = len(pts)
    phi_nodes = metric.length_factor(pts)
    loc_idx = np.arange(nloc).reshape((res,) * m)
    coords = np.stack(np.unravel_index(np.arange(nloc), (res,) * m), axis=-1)

    table = np.empty((nloc, noff))
    index_of = {tuple(o): k for k, o in enumerate(offs.tolist())}
    positive = [k for k, o in enumerate(offs.tolist()) if next(c for c in o if c) > 0]
    for k in positive:
        o = offs[k]
        length = float(np.linalg.norm(o)) / res
        end = loc_idx[tuple(((coords + o) % res).T)]
        w = length * (phi_nodes + phi_nodes[end]) / 2
        mid = pts + o / (2 * res)
        refine = metric.refine_mask(mid, np.full(nloc, length / 2))
        if refine.any():
            gl_t, gl_w = _gl_rule(gl_subintervals(length, metric.feature_scale))
            a = pts[refine]
            q = a[:, None, :] + gl_t[None, :, None] * (o / res)[None, None, :]
            phi = metric.length_factor(q.reshape(-1, m)).reshape(q.shape[:2])
            w[refine] = length * (phi @ gl_w)
        table[:, k] = w
        kneg = index_of[tuple(-o)]
        start = loc_idx[tuple(((coords - o) % res).T)]
        table[:, kneg] = w[start]
    return table


@dataclass
class LatticeGraph:
    """The implicit grid graph of a periodic metric at a given resolution and stencil."""

    metric: object
    res: int
    R: int
    offsets: np.ndarray
    wtable: np.ndarray
    pot_lin: np.ndarray
    pot_tab: np.ndarray
    budget: int = DEFAULT_BUDGET

    @property
    def dim(self) -> int:
        return self.offsets.shape[1]

    @property
    def overhead(self) -> float:
        return stencil_overhead(self.dim, self.R)

    def potential_at(self, G) -> np.ndarray:
        """All calibrating potentials at global nodes ``G``; shape ``(..., l)``."""
        G = np.asarray(G, dtype=np.int64)
        local = np.ravel_multi_index(np.moveaxis(G % self.res, -1, 0), (self.res,) * self.dim)
        tab = self.pot_tab[:, local]
        tab = np.moveaxis(tab, 0, -1)
        out = tab.copy()
        # same summation order as the kernels
        for d in range(self.dim):
            out = out + self.pot_lin[:, d] * G[..., d:d + 1].astype(float)
        return out

    def snap(self, x) -> np.ndarray:
        return np.rint(np.asarray(x, dtype=float) * self.res).astype(np.int64)


def build_grid(metric, res: int, R: int = 2, budget: int = DEFAULT_BUDGET) -> LatticeGraph:
    offs = stencil_offsets(metric.dim, R)
    table = edge_weight_table(metric, res, R)
    if hasattr(metric, "calibrating_potentials"):
        lin, tab = metric.calibrating_potentials(res, R)
    else:
        lin, tab = np.zeros((0, metric.dim)), np.zeros((0, res ** metric.dim))
    return LatticeGraph(metric=metric, res=res, R=R, offsets=np.ascontiguousarray(offs),
                        wtable=np.ascontiguousarray(table), pot_lin=np.ascontiguousarray(lin),
                        pot_tab=np.ascontiguousarray(tab), budget=budget)
