"""Explicit broken paths that ride the short curves, with their length certificate.

The path alternates connectors (grid shortest paths) with rides along lifted
curves. Each ride covers its nominal number of periods give or take ``e``;
the exit inside that window is the one nearest to the next line (or to the
endpoint), which keeps every middle connector below the line gap ``D``.
"""

from __future__ import annotations

import csv
import io
import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .metric import polyline_length
from .polytope import dot, format_rational
from .solver.grid import CoverBox, LatticeGraph
from .solver.paths import distance_field, extract_path


@dataclass
class Segment:
    kind: str  # "connector" or "ride"
    points: np.ndarray
    length: float
    curve: int | None = None
    periods: float | None = None  # signed ride length in curve periods


@dataclass
class LemmaPath:
    x: np.ndarray
    w: tuple[int, ...]
    facet_id: int
    coefficients: tuple[int, ...]
    segments: list[Segment]
    total_length: float
    lambda_w: Fraction

    @property
    def rides(self) -> list[Segment]:
        return [s for s in self.segments if s.kind == "ride"]

    @property
    def connectors(self) -> list[Segment]:
        return [s for s in self.segments if s.kind == "connector"]

    def polyline(self) -> np.ndarray:
        pts = [self.segments[0].points]
        for s in self.segments[1:]:
            pts.append(s.points[1:])
        return np.concatenate(pts)

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        m = len(self.x)
        wr.writerow(["segment", "kind"] + [f"x{d}" for d in range(m)])
        for k, s in enumerate(self.segments):
            for p in s.points:
                wr.writerow([k, s.kind] + [repr(float(c)) for c in p])
        return buf.getvalue()


def _line_nodes(graph: LatticeGraph, curves, c: int, box: CoverBox) -> np.ndarray:
    """Lattice nodes of every lift of curve ``c`` inside ``box``, one per parameter step."""
    res, m = graph.res, graph.dim
    base = graph.snap(curves.offsets[c])
    v = curves.directions[c]
    j = np.arange(res)
    pts = base[None, :] + j[:, None] * v[None, :]
    lo = np.array(box.lo) * res
    hi = np.array(box.hi) * res
    kmin = np.ceil((lo[None, :] - pts) / res).astype(np.int64).min(axis=0)
    kmax = np.floor((hi[None, :] - pts) / res).astype(np.int64).max(axis=0)
    ks = np.array(list(itertools.product(*[range(a, b + 1) for a, b in zip(kmin, kmax)])), dtype=np.int64)
    allp = (pts[:, None, :] + ks[None, :, :] * res).reshape(-1, m)
    inside = np.all((allp >= lo) & (allp <= hi), axis=1)
    return allp[inside]


def _field_from(graph: LatticeGraph, sources: np.ndarray, extra: np.ndarray | None, padding: int):
    pts = sources if extra is None else np.concatenate([sources, extra])
    box = CoverBox.around(pts, graph.res, graph.R, padding)
    return distance_field(graph, sources, box, keep_pred=True)


def _connector(graph: LatticeGraph, fld, target: np.ndarray):
    idx = int(fld.box.node_index(target))
    nodes = np.array(extract_path(fld.predecessors, idx))
    return fld.box.points(nodes), fld.box.node_coords(nodes[0])


def build_lemma_path(graph: LatticeGraph, x, facet_id: int, coefficients, padding: int = 1) -> LemmaPath:
    """Greedy broken path from ``x`` to ``x + sum n_j v_j`` through the facet's lines.

    ``coefficients`` are aligned with the facet's vertex ids. Points outside
    the unit cell are handled by translating the construction by the integer
    part of ``x``.
    """
    H = graph.metric
    P, C = H.polytope, H.curves
    res = graph.res
    facet = P.facets[facet_id]
    n = [int(c) for c in coefficients]
    if len(n) != len(facet.vertex_ids) or any(c < 0 for c in n) or not any(n):
        raise ValueError("coefficients must be nonnegative, not all zero, one per facet vertex")
    x = np.asarray(x, dtype=float)
    shift = np.floor(x)
    x0 = x - shift

    w = np.zeros(P.dim, dtype=np.int64)
    for vid, c in zip(facet.vertex_ids, n):
        w += c * np.asarray(P.vertices[vid].v, dtype=np.int64)
    Gx = graph.snap(x0)
    Gt = Gx + w * res

    segments: list[Segment] = []

    def add(kind, pts, curve=None, periods=None):
        pts = np.asarray(pts, dtype=float) + shift
        segments.append(Segment(kind, pts, polyline_length(H, pts), curve, periods))

    if np.any(Gx / res != x0):
        add("snap", [x0, Gx / res])

    todo = [k for k, c in enumerate(n) if c > 0]
    sources = Gx[None, :]
    while todo:
        fld = _field_from(graph, sources, None, padding)
        best = None
        for k in todo:
            cidx, _ = P.curve_of(facet.vertex_ids[k])
            nodes = _line_nodes(graph, C, cidx, fld.box)
            if not len(nodes):
                continue
            vals = fld.at(nodes)
            j = int(np.argmin(vals))
            if best is None or vals[j] < best[0]:
                best = (float(vals[j]), k, nodes[j])
        if best is None:
            raise RuntimeError("no candidate line inside the search box; increase padding")
        _, k, entry = best
        pts, _ = _connector(graph, fld, entry)
        if len(pts) > 1:
            add("connector", pts)
        todo.remove(k)

        # ride n_k periods, exit anywhere within +-e of arc length
        vid = facet.vertex_ids[k]
        cidx, sign = P.curve_of(vid)
        v = sign * C.directions[cidx]
        eps_c = float(P.vertices[vid].epsilon)
        J = int(math.floor(H.e_const / eps_c * res))
        steps = n[k] * res + np.arange(-J, J + 1)
        steps = steps[steps > 0]
        window = entry[None, :] + steps[:, None] * v[None, :]
        extra = Gt[None, :] if not todo else None
        fld = _field_from(graph, window, extra, padding)
        if todo:
            best = None
            for k2 in todo:
                c2, _ = P.curve_of(facet.vertex_ids[k2])
                nodes = _line_nodes(graph, C, c2, fld.box)
                if not len(nodes):
                    continue
                vals = fld.at(nodes)
                j = int(np.argmin(vals))
                if best is None or vals[j] < best[0]:
                    best = (float(vals[j]), k2, nodes[j])
            goal = best[2]
        else:
            goal = Gt
        pts, exit_node = _connector(graph, fld, goal)
        periods = float(np.round((exit_node - entry) @ v / (v @ v))) / res
        add("ride", [entry / res, exit_node / res], cidx, periods)
        sources = exit_node[None, :]
        if not todo:
            if len(pts) > 1:
                add("connector", pts)
        # otherwise the next iteration re-derives the connector from the exit node

    end = x0 + w
    if np.any(Gt / res != end):
        add("snap", [Gt / res, end])
    segments = _fold_snaps(H, segments)
    total = float(sum(s.length for s in segments))
    return LemmaPath(x=x, w=tuple(int(c) for c in w), facet_id=facet_id, coefficients=tuple(n),
                     segments=segments, total_length=total, lambda_w=dot(facet.lam, w.tolist()))


def _fold_snaps(H, segments: list[Segment]) -> list[Segment]:
    # a snap belongs to the adjacent end connector; stand alone only next to a ride
    out = list(segments)
    if out and out[0].kind == "snap" and len(out) > 1 and out[1].kind == "connector":
        pts = np.concatenate([out[0].points[:1], out[1].points])
        out[:2] = [Segment("connector", pts, polyline_length(H, pts))]
    if out and out[-1].kind == "snap" and len(out) > 1 and out[-2].kind == "connector":
        pts = np.concatenate([out[-2].points, out[-1].points[1:]])
        out[-2:] = [Segment("connector", pts, polyline_length(H, pts))]
    for k, s in enumerate(out):
        if s.kind == "snap":
            out[k] = Segment("connector", s.points, s.length)
    return out


@dataclass
class BoundReport:
    passed: bool
    total_length: float
    bound: float  # lambda(w) + C
    tol: float
    lambda_w: str
    C_hat: float
    ledger: list[dict] = field(default_factory=list)


def verify_bound(graph: LatticeGraph, path: LemmaPath, C_hat: float, diam: float, D: float,
                 tol: float = 1e-2) -> BoundReport:
    """Pass iff the path is no longer than ``lambda(w) + C``; itemize the per-segment budgets.

    The first and last connectors are budgeted by ``diam``, the middle ones by
    ``D`` and each ride by ``n_j eps_j + e``.
    """
    H = graph.metric
    P = H.polytope
    facet = P.facets[path.facet_id]
    ride_idx = [k for k, s in enumerate(path.segments) if s.kind == "ride"]
    ledger = []
    for k, s in enumerate(path.segments):
        if s.kind == "ride":
            # rides follow the greedy order, which may differ from facet order
            kk = next(j for j, v in enumerate(facet.vertex_ids) if P.curve_of(v)[0] == s.curve)
            vid = facet.vertex_ids[kk]
            budget = path.coefficients[kk] * float(P.vertices[vid].epsilon) + H.e_const
        else:
            budget = diam if (k < ride_idx[0] or k > ride_idx[-1]) else D
        ledger.append({"index": k, "kind": s.kind, "length": s.length, "budget": budget,
                       "within": s.length <= budget + tol})
    bound = float(path.lambda_w) + C_hat
    return BoundReport(passed=path.total_length <= bound + tol, total_length=path.total_length,
                       bound=bound, tol=tol, lambda_w=format_rational(path.lambda_w),
                       C_hat=C_hat, ledger=ledger)
