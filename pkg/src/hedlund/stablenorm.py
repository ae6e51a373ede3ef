"""Stable-norm estimates f(nw)/n and the certified sandwich between lambda(w) and lambda(w) + C/n."""

from __future__ import annotations

import csv
import io
import itertools
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .errors import OutOfMemoryBudget
from .polytope import dot, format_rational, integer_cone_decompose, polytope_norm
from .solver.grid import CoverBox, LatticeGraph
from .solver.paths import diameter_upper, line_gap_D, shortest_distance_nodes

STARTS_PER_CURVE = 8
COARSE_LATTICE = 3


@dataclass(frozen=True)
class Tolerances:
    """Slack used by the sandwich certificate; printed with every report."""

    low: float = 1e-3  # below lambda(w), quadrature slack
    quad: float = 1e-2  # above the upper bound
    monotone: float = 2e-3  # allowed increase between consecutive entries
    trend_ratio: float = 0.6  # last gap must be at most this fraction of the first
    trend_slack: float = 2e-3  # absolute slack on the trend test (gaps near zero)


@dataclass
class ConstantReport:
    diam: float
    D: float
    e: float
    kappa: int
    C_hat: float
    overhead: float


def constant_C(graph: LatticeGraph, diam: float | None = None, D: float | None = None) -> ConstantReport:
    """``C = 2 diam + kappa (D + e)`` from solver upper bounds of ``diam`` and ``D``.

    Larger values are still valid, so the inflated solver estimates are safe.
    """
    H = graph.metric
    if diam is None:
        diam = diameter_upper(graph)
    if D is None:
        D = line_gap_D(graph, H.curves)
    k = H.polytope.kappa
    return ConstantReport(diam=diam, D=D, e=H.e_const, kappa=k,
                          C_hat=2.0 * diam + k * (D + H.e_const), overhead=graph.overhead)


def default_starts(graph: LatticeGraph) -> np.ndarray:
    """Snapped start nodes: points along each curve, then a coarse lattice of the unit cell.

    Duplicates modulo the period are dropped, keeping first occurrence.
    """
    m, res = graph.dim, graph.res
    pts = []
    curves = getattr(graph.metric, "curves", None)
    if curves is not None:
        t = np.arange(STARTS_PER_CURVE) / STARTS_PER_CURVE
        for i in range(curves.n):
            pts.append(curves.curve_point(i, t, torus=True))
    ax = np.arange(COARSE_LATTICE) / COARSE_LATTICE
    pts.append(np.array(list(itertools.product(ax, repeat=m))))
    G = graph.snap(np.concatenate(pts)) % res
    _, first = np.unique(G, axis=0, return_index=True)
    return G[np.sort(first)]


@dataclass
class FEstimate:
    value: float  # upper-bound estimate of f(v)
    lower: Fraction | None  # exact calibration lower bound polytope_norm(v)
    start: np.ndarray  # global node of the minimizing start
    path: np.ndarray
    box: CoverBox
    settled: int
    n_starts: int
    n_pruned: int


def estimate_f(graph: LatticeGraph, v, starts=None, workers: int = 1, padding: int = 1) -> FEstimate:
    """``min_x d(x, x + v)`` over sampled starts ``x``.

    Each search is cut off once it provably cannot beat the best value so
    far; the minimum and its (lowest-index) minimizer do not depend on the
    order in which starts finish, so results are identical for any
    ``workers``.
    """
    v = np.asarray(v, dtype=np.int64)
    if not v.any():
        raise ValueError("v must be nonzero")
    starts = default_starts(graph) if starts is None else np.atleast_2d(np.asarray(starts, dtype=np.int64))
    shift = v * graph.res
    lock = threading.Lock()
    best = [math.inf]
    results: list = [None] * len(starts)

    def job(k: int):
        with lock:
            bound = best[0]
        r = shortest_distance_nodes(graph, starts[k], starts[k] + shift, padding=padding, bound=bound)
        results[k] = r
        if r is not None:
            with lock:
                best[0] = min(best[0], r.distance)

    if workers <= 1:
        for k in range(len(starts)):
            job(k)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(job, range(len(starts))))

    done = [(r.distance, k) for k, r in enumerate(results) if r is not None]
    value, k = min(done)
    r = results[k]
    P = getattr(graph.metric, "polytope", None)
    lower = polytope_norm(P, v.tolist()) if P is not None else None
    return FEstimate(value=value, lower=lower, start=starts[k], path=r.path, box=r.box,
                     settled=r.settled, n_starts=len(starts), n_pruned=len(starts) - len(done))


@dataclass
class SequenceEntry:
    n: int
    f_hat_over_n: float | None
    box: CoverBox | None
    res: int
    error: str | None = None


def norm_sequence(graph: LatticeGraph, w, n_max: int, starts=None, workers: int = 1) -> list[SequenceEntry]:
    """``f(nw)/n`` for ``n = 1..n_max``; budget overruns are recorded per entry."""
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    w = np.asarray(w, dtype=np.int64)
    starts = default_starts(graph) if starts is None else starts
    out = []
    for n in range(1, n_max + 1):
        try:
            est = estimate_f(graph, n * w, starts, workers)
        except OutOfMemoryBudget as exc:
            out.append(SequenceEntry(n=n, f_hat_over_n=None, box=None, res=graph.res, error=str(exc)))
            continue
        out.append(SequenceEntry(n=n, f_hat_over_n=est.value / n, box=est.box, res=graph.res))
    return out


@dataclass
class SandwichReport:
    w: tuple[int, ...]
    facet_id: int
    coefficients: tuple[int, ...]
    lambda_w: Fraction
    C_hat: float
    overhead: float
    n_list: list[int]
    f_hat_over_n: list[float | None]
    lower: list[float]
    upper: list[float]
    pass_n: list[bool]
    monotone: bool
    trend: bool  # last gap <= trend_ratio * first gap + trend_slack
    passed: bool  # all n pass and the sequence is nonincreasing within tolerance
    boxes: list[str]
    res: int
    tolerances: Tolerances = field(default_factory=Tolerances)
    errors: list[str | None] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda_w"] = format_rational(self.lambda_w)
        d["w"] = list(self.w)
        d["coefficients"] = list(self.coefficients)
        return d

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["n", "box", "res", "f_hat_over_n", "lower", "upper", "pass"])
        for k, n in enumerate(self.n_list):
            f = self.f_hat_over_n[k]
            wr.writerow([n, self.boxes[k], self.res, "" if f is None else repr(f),
                         repr(self.lower[k]), repr(self.upper[k]), int(self.pass_n[k])])
        return buf.getvalue()


def _box_label(box: CoverBox | None) -> str:
    if box is None:
        return ""
    return " ".join(map(str, box.lo)) + " .. " + " ".join(map(str, box.hi))


def sandwich_check(graph: LatticeGraph, w, n_max: int, C_hat: float | None = None,
                   tolerances: Tolerances | None = None, starts=None, workers: int = 1) -> SandwichReport:
    """Check ``lambda(w) - tol <= f(nw)/n <= (1 + eta_R)(lambda(w) + C/n) + tol`` for each n.

    ``w`` must be a nonnegative integer combination of the primitive classes
    of a single facet; otherwise :class:`NotInIntegerCone` is raised.
    """
    tol = tolerances or Tolerances()
    H = graph.metric
    P = H.polytope
    w = tuple(int(c) for c in w)
    fid, coeffs = integer_cone_decompose(P, w)
    lam = dot(P.facets[fid].lam, w)
    if C_hat is None:
        C_hat = constant_C(graph).C_hat
    eta = graph.overhead
    seq = norm_sequence(graph, w, n_max, starts, workers)
    lamf = float(lam)
    lower, upper, ok = [], [], []
    for e in seq:
        lo = lamf - tol.low
        hi = (1 + eta) * (lamf + C_hat / e.n) + tol.quad
        lower.append(lo)
        upper.append(hi)
        ok.append(e.f_hat_over_n is not None and lo <= e.f_hat_over_n <= hi)
    vals = [e.f_hat_over_n for e in seq]
    known = [x for x in vals if x is not None]
    monotone = all(b <= a + tol.monotone for a, b in zip(known, known[1:]))
    trend = bool(known) and (known[-1] - lamf) <= tol.trend_ratio * (known[0] - lamf) + tol.trend_slack
    return SandwichReport(
        w=w, facet_id=fid, coefficients=coeffs, lambda_w=lam, C_hat=C_hat, overhead=eta,
        n_list=[e.n for e in seq], f_hat_over_n=vals, lower=lower, upper=upper, pass_n=ok,
        monotone=monotone, trend=trend, passed=all(ok) and monotone,
        boxes=[_box_label(e.box) for e in seq], res=graph.res, tolerances=tol,
        errors=[e.error for e in seq])
