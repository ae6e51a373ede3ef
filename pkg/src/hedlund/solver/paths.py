"""Distance queries on the lattice graph: point-to-point, fields, diameter, line gaps."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import OutOfMemoryBudget, TargetOutsideBox
from . import backend
from .grid import CoverBox, LatticeGraph

MAX_PADDING = 16


@dataclass
class DistanceField:
    box: CoverBox
    values: np.ndarray  # shaped like box.shape
    sources: np.ndarray  # global node coords, (k, m)
    predecessors: np.ndarray | None = field(default=None, repr=False)

    def at(self, G) -> np.ndarray:
        return self.values.reshape(-1)[self.box.node_index(G)]


@dataclass
class PathResult:
    distance: float
    path: np.ndarray  # polyline in cover coordinates
    box: CoverBox
    source: np.ndarray  # snapped global node coords
    target: np.ndarray
    settled: int
    padding: int


def _run(graph: LatticeGraph, box: CoverBox, sources, target: int = -1,
         heuristic_target=None, kernel=None, bound: float = math.inf):
    if box.size > graph.budget:
        raise OutOfMemoryBudget(f"box {box.lo}..{box.hi} at res {box.res} has {box.size} nodes "
                                f"(budget {graph.budget}); reduce the resolution or stencil radius")
    search = kernel or backend.search
    m = graph.dim
    if heuristic_target is not None and len(graph.pot_lin):
        lin, tab, tgt = graph.pot_lin, graph.pot_tab, np.ascontiguousarray(heuristic_target)
    else:
        lin, tab, tgt = np.zeros((0, m)), np.zeros((0, 1)), np.zeros(0)
    return search(np.array(box.shape, dtype=np.int64), box.origin, int(box.res), graph.offsets,
                  graph.wtable, np.ascontiguousarray(sources, dtype=np.int64), int(target),
                  np.ascontiguousarray(lin), np.ascontiguousarray(tab), tgt, bound)


def extract_path(pred: np.ndarray, target: int) -> list[int]:
    path = [target]
    while pred[path[-1]] >= 0:
        path.append(int(pred[path[-1]]))
    return path[::-1]


def shortest_distance_nodes(graph: LatticeGraph, Gx, Gy, padding: int = 1, box: CoverBox | None = None,
                            heuristic: bool = True, kernel=None,
                            bound: float = math.inf) -> PathResult | None:
    """Shortest path between two global lattice nodes.

    Without an explicit box the search uses the cell-aligned bounding box
    padded by ``padding`` cells; if the optimal path touches the box boundary
    the padding is doubled and the search repeated. Returns None when the
    distance provably exceeds ``bound`` (requires the heuristic).
    """
    Gx = np.asarray(Gx, dtype=np.int64)
    Gy = np.asarray(Gy, dtype=np.int64)
    auto = box is None
    pad = padding
    while True:
        if auto:
            box = CoverBox.around([Gx, Gy], graph.res, graph.R, pad)
        elif not (box.contains_node(Gx) and box.contains_node(Gy)):
            raise TargetOutsideBox(f"{Gx}/{Gy} not inside box {box.lo}..{box.hi}")
        s = int(box.node_index(Gx))
        t = int(box.node_index(Gy))
        htarget = graph.potential_at(Gy) if heuristic else None
        dist, pred, settled = _run(graph, box, [s], t, htarget, kernel, bound)
        if not math.isfinite(dist[t]) or dist[t] > bound:
            if math.isfinite(bound):
                return None
            raise TargetOutsideBox(f"{Gy} unreachable inside box {box.lo}..{box.hi}")
        nodes = extract_path(pred, t)
        touches = bool(np.any(box.on_boundary(np.array(nodes))))
        if not auto or not touches or pad >= MAX_PADDING:
            break
        pad *= 2
    return PathResult(distance=float(dist[t]), path=box.points(np.array(nodes)), box=box,
                      source=Gx, target=Gy, settled=int(settled), padding=pad)


def shortest_distance(graph: LatticeGraph, x, y, padding: int = 1, box: CoverBox | None = None,
                      heuristic: bool = True, kernel=None) -> tuple[float, np.ndarray]:
    """``(d_hat, path)`` between the lattice nodes nearest to ``x`` and ``y``."""
    r = shortest_distance_nodes(graph, graph.snap(x), graph.snap(y), padding, box, heuristic, kernel)
    return r.distance, r.path


def distance_field(graph: LatticeGraph, sources, box: CoverBox, keep_pred: bool = False,
                   kernel=None) -> DistanceField:
    """Full sweep from one or more source nodes (global coords, ``(k, m)`` or ``(m,)``)."""
    G = np.atleast_2d(np.asarray(sources, dtype=np.int64))
    for g in G:
        if not box.contains_node(g):
            raise TargetOutsideBox(f"source {g} outside box")
    dist, pred, _ = _run(graph, box, box.node_index(G), -1, None, kernel)
    return DistanceField(box=box, values=dist.reshape(box.shape), sources=G,
                         predecessors=pred if keep_pred else None)


def _lattice_shifts(m: int) -> np.ndarray:
    return np.array(list(itertools.product((-1, 0, 1), repeat=m)), dtype=np.int64)


def cell_minimum(field_: DistanceField, m: int, res: int) -> np.ndarray:
    """Minimize a ``[-1, 2]^m`` field over the 3^m lifts of each unit-cell node."""
    local = np.stack(np.unravel_index(np.arange(res ** m), (res,) * m), axis=-1)
    best = np.full(len(local), np.inf)
    for k in _lattice_shifts(m):
        best = np.minimum(best, field_.at(local + k * res))
    return best


def torus_distances(graph: LatticeGraph, sources) -> tuple[np.ndarray, DistanceField]:
    """Torus distance from the source set to every node of the unit cell.

    Sweeps the cover box ``[-1, 2]^m`` and minimizes over the 3^m lifts.
    """
    m, res = graph.dim, graph.res
    box = CoverBox((-1,) * m, (2,) * m, res, graph.R)
    field_ = distance_field(graph, sources, box)
    return cell_minimum(field_, m, res), field_


def diameter_field(graph: LatticeGraph, source=None) -> DistanceField:
    """The sweep used by :func:`diameter_upper` (cacheable)."""
    m = graph.dim
    G0 = np.zeros(m, dtype=np.int64) if source is None else graph.snap(source)
    G0 = G0 % graph.res
    return torus_distances(graph, G0[None, :])[1]


def diameter_upper(graph: LatticeGraph, source=None, field_: DistanceField | None = None) -> float:
    """Upper bound ``2 (1 + eta_R) max_y d(x0, y)`` on the torus diameter."""
    if field_ is None:
        field_ = diameter_field(graph, source)
    best = cell_minimum(field_, graph.dim, graph.res)
    return 2.0 * float(best.max()) * (1.0 + graph.overhead)


def curve_nodes(graph: LatticeGraph, curves, i: int) -> np.ndarray:
    """Lattice nodes of curve ``i`` over one period, reduced into the unit cell."""
    t = np.arange(graph.res) / graph.res
    G = graph.snap(curves.curve_point(i, t))
    return G % graph.res


def line_gap_D(graph: LatticeGraph, curves) -> float:
    """``max_{i != j} min d(Gamma_i, Gamma_j)``, inflated by ``1 + eta_R``; 0 for one curve."""
    n = curves.n
    if n < 2:
        return 0.0
    m, res = graph.dim, graph.res
    shifts = _lattice_shifts(m) * res
    worst = 0.0
    for i in range(n):
        _, field_ = torus_distances(graph, curve_nodes(graph, curves, i))
        for j in range(n):
            if j == i:
                continue
            Gj = curve_nodes(graph, curves, j)
            lifts = (Gj[:, None, :] + shifts[None, :, :]).reshape(-1, m)
            worst = max(worst, float(field_.at(lifts).min()))
    return worst * (1.0 + graph.overhead)


def pairwise_gaps(graph: LatticeGraph, curves) -> np.ndarray:
    """Matrix of uninflated min distances between curves (diagnostics and tests)."""
    n = curves.n
    m, res = graph.dim, graph.res
    shifts = _lattice_shifts(m) * res
    out = np.zeros((n, n))
    for i in range(n):
        _, field_ = torus_distances(graph, curve_nodes(graph, curves, i))
        for j in range(n):
            Gj = curve_nodes(graph, curves, j)
            lifts = (Gj[:, None, :] + shifts[None, :, :]).reshape(-1, m)
            out[i, j] = float(field_.at(lifts).min())
    return out
