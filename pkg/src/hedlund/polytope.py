"""Exact convex geometry of centrally symmetric rational polytopes.

Everything here works in :class:`fractions.Fraction` arithmetic. Floating
point appears only inside :func:`enumerate_facets`, where qhull proposes
candidate facets that are then rebuilt and verified exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .errors import (
    DegenerateFacet,
    DimensionTooSmall,
    NotExtreme,
    NotInIntegerCone,
    NotSpanning,
    NotSymmetric,
    ZeroVector,
)

RationalVec = tuple[Fraction, ...]


def as_rational_vec(raw: Iterable) -> RationalVec:
    """Coerce ints, Fractions or ``"p/q"`` strings into a rational tuple."""
    out = []
    for c in raw:
        if isinstance(c, float):
            # floats are only accepted when they are exactly integral
            if not c.is_integer():
                raise ValueError(f"non-integral float {c!r}; pass 'p/q' strings")
            c = int(c)
        out.append(Fraction(c))
    return tuple(out)


def format_rational(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


def dot(a: Sequence, b: Sequence):
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def neg(v: RationalVec) -> RationalVec:
    return tuple(-c for c in v)


def solve_exact(rows: Sequence[Sequence[Fraction]], rhs: Sequence[Fraction]):
    """Solve a square system over the rationals; ``None`` when singular."""
    n = len(rows)
    a = [list(map(Fraction, r)) + [Fraction(b)] for r, b in zip(rows, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return None
        a[col], a[piv] = a[piv], a[col]
        p = a[col][col]
        a[col] = [x / p for x in a[col]]
        for r in range(n):
            if r != col and a[r][col] != 0:
                f = a[r][col]
                a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return tuple(a[r][n] for r in range(n))


def rank_exact(vectors: Sequence[Sequence[Fraction]]) -> int:
    rows = [list(map(Fraction, v)) for v in vectors]
    if not rows:
        return 0
    ncol = len(rows[0])
    rank = 0
    for col in range(ncol):
        piv = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if piv is None:
            continue
        rows[rank], rows[piv] = rows[piv], rows[rank]
        for r in range(len(rows)):
            if r != rank and rows[r][col] != 0:
                f = rows[r][col] / rows[rank][col]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[rank])]
        rank += 1
    return rank


@dataclass(frozen=True)
class VertexDatum:
    """A polytope vertex together with its indivisible integer class.

    ``epsilon * v_tilde == v`` holds exactly and ``gcd(v) == 1``.
    """

    v_tilde: RationalVec
    v: tuple[int, ...]
    epsilon: Fraction


@dataclass(frozen=True)
class Facet:
    vertex_ids: tuple[int, ...]
    lam: RationalVec

    def __call__(self, v: Sequence) -> Fraction:
        return dot(self.lam, v)


@dataclass(frozen=True)
class Polytope:
    """Validated admissible polytope.

    ``vertices`` has length ``2N``: the first ``N`` entries are the chosen
    representatives, entry ``N + k`` is the negation of entry ``k``.
    """

    vertices: tuple[VertexDatum, ...]
    facets: tuple[Facet, ...]
    kappa: int

    @property
    def dim(self) -> int:
        return len(self.vertices[0].v_tilde)

    @property
    def n_curves(self) -> int:
        return len(self.vertices) // 2

    @property
    def classes(self) -> list[tuple[int, ...]]:
        """Primitive classes v_1..v_N carried by the curves."""
        return [vd.v for vd in self.vertices[: self.n_curves]]

    @property
    def epsilons(self) -> list[Fraction]:
        return [vd.epsilon for vd in self.vertices[: self.n_curves]]

    def curve_of(self, vertex_id: int) -> tuple[int, int]:
        """Map a vertex index to ``(curve index, sign)``."""
        n = self.n_curves
        return (vertex_id, 1) if vertex_id < n else (vertex_id - n, -1)

    def norm(self, v: Sequence) -> Fraction:
        return polytope_norm(self, v)


def primitivize(v_tilde: Sequence) -> VertexDatum:
    vt = as_rational_vec(v_tilde)
    if all(c == 0 for c in vt):
        raise ZeroVector("cannot primitivize the zero vector")
    lcm = 1
    for c in vt:
        lcm = lcm * c.denominator // math.gcd(lcm, c.denominator)
    ints = [int(c * lcm) for c in vt]
    g = math.gcd(*ints)
    v = tuple(i // g for i in ints)
    return VertexDatum(v_tilde=vt, v=v, epsilon=Fraction(lcm, g))


def _facet_from_subset(points: Sequence[RationalVec], subset) -> RationalVec | None:
    m = len(points[0])
    return solve_exact([points[j] for j in subset], [Fraction(1)] * m)


def _verified_facet(points: Sequence[RationalVec], lam: RationalVec) -> Facet | None:
    vals = [dot(lam, p) for p in points]
    if any(val > 1 for val in vals):
        return None
    on = tuple(j for j, val in enumerate(vals) if val == 1)
    m = len(lam)
    if len(on) < m or rank_exact([points[j] for j in on]) < m:
        return None
    return Facet(vertex_ids=on, lam=lam)


def _facets_exhaustive(points: Sequence[RationalVec]) -> list[Facet]:
    m = len(points[0])
    seen: dict[RationalVec, Facet] = {}
    for subset in itertools.combinations(range(len(points)), m):
        lam = _facet_from_subset(points, subset)
        if lam is None or lam in seen:
            continue
        f = _verified_facet(points, lam)
        if f is not None:
            seen[lam] = f
    return list(seen.values())


def _facet_from_points(points: Sequence[RationalVec], on: Sequence[int]) -> RationalVec | None:
    m = len(points[0])
    for subset in itertools.combinations(on, m):
        lam = _facet_from_subset(points, subset)
        if lam is not None:
            return lam
    return None


def _facets_hull(points: Sequence[RationalVec]) -> list[Facet] | None:
    arr = np.array([[float(c) for c in p] for p in points])
    try:
        hull = ConvexHull(arr)
    except QhullError:
        return None
    seen: dict[RationalVec, Facet] = {}
    for simplex, eq in zip(hull.simplices, hull.equations):
        lam = _facet_from_subset(points, simplex)
        if lam is None:
            # triangulated coplanar facets can yield flat simplices; rebuild from the facet's points
            on = [j for j, x in enumerate(arr) if abs(float(np.dot(eq[:-1], x) + eq[-1])) < 1e-9]
            lam = _facet_from_points(points, on)
            if lam is None:
                raise DegenerateFacet(f"hull facet through vertices {on} contains the origin")
        if lam in seen:
            continue
        f = _verified_facet(points, lam)
        if f is None:
            return None
        seen[lam] = f
    return list(seen.values())


def _hull_is_consistent(points, facets: list[Facet]) -> bool:
    # each vertex of a full-dimensional polytope sits on facets whose normals span R^m
    m = len(points[0])
    lam_sets = set(f.lam for f in facets)
    if any(neg(lam) not in lam_sets for lam in lam_sets):
        return False
    for j in range(len(points)):
        on = [f.lam for f in facets if j in f.vertex_ids]
        if rank_exact(on) < m:
            return False
    return True


def enumerate_facets(points: Sequence[RationalVec], method: str = "hull") -> list[Facet]:
    """All facets of ``conv(points)`` with exact functionals, sorted.

    ``method="hull"`` takes candidate facets from qhull and rebuilds each one
    exactly; if anything fails verification the exhaustive subset search is
    used instead. Facets are ordered by descending lexicographic functional.
    """
    facets = None
    if method == "hull":
        facets = _facets_hull(points)
        if facets is not None and not _hull_is_consistent(points, facets):
            facets = None
    if facets is None:
        facets = _facets_exhaustive(points)
    facets.sort(key=lambda f: f.lam, reverse=True)
    return facets


def from_vertices(raw: Sequence[Sequence], method: str = "hull") -> Polytope:
    """Validate raw vertices and build the admissible polytope.

    If no listed vertex has its negation in the list, the negations are added.
    A list mixing paired and unpaired vertices raises :class:`NotSymmetric`.
    """
    if not raw:
        raise ValueError("empty vertex list")
    pts = [as_rational_vec(r) for r in raw]
    m = len(pts[0])
    if any(len(p) != m for p in pts):
        raise ValueError("vertices have inconsistent dimensions")
    if m < 3:
        raise DimensionTooSmall(f"dimension {m} < 3")
    for p in pts:
        if all(c == 0 for c in p):
            raise ZeroVector("zero vertex")
    pts = list(dict.fromkeys(pts))
    present = set(pts)
    unpaired = [p for p in pts if neg(p) not in present]
    if len(unpaired) == len(pts):
        pts = pts + [neg(p) for p in pts]
    elif unpaired:
        raise NotSymmetric(f"vertex {tuple(map(format_rational, unpaired[0]))} lacks its negation")

    reps: list[RationalVec] = []
    for p in pts:
        if p not in reps and neg(p) not in reps:
            reps.append(p)
    ordered = reps + [neg(p) for p in reps]

    if rank_exact(ordered) < m:
        raise NotSpanning("vertices do not span R^m")

    facets = enumerate_facets(ordered, method=method)
    for j, p in enumerate(ordered):
        on = [f.lam for f in facets if j in f.vertex_ids]
        if rank_exact(on) < m:
            raise NotExtreme(f"{tuple(map(format_rational, p))} is not an extreme point")

    vertices = tuple(primitivize(p) for p in ordered)
    kappa = max(len(f.vertex_ids) for f in facets)
    return Polytope(vertices=vertices, facets=tuple(facets), kappa=kappa)


def polytope_norm(P: Polytope, v: Sequence) -> Fraction:
    vv = as_rational_vec(v)
    return max(dot(f.lam, vv) for f in P.facets)


def kappa(P: Polytope) -> int:
    return max(len(f.vertex_ids) for f in P.facets)


def _max_facets(P: Polytope, v: RationalVec) -> list[int]:
    vals = [dot(f.lam, v) for f in P.facets]
    top = max(vals)
    return [i for i, val in enumerate(vals) if val == top]


def _basic_decompositions(P: Polytope, facet_id: int, v: RationalVec):
    """Nonnegative basic solutions of ``sum alpha_j v~_j = v`` in pivot order."""
    f = P.facets[facet_id]
    m = P.dim
    for subset in itertools.combinations(range(len(f.vertex_ids)), m):
        cols = [P.vertices[f.vertex_ids[k]].v_tilde for k in subset]
        rows = [[cols[c][r] for c in range(m)] for r in range(m)]
        sol = solve_exact(rows, v)
        if sol is None or any(a < 0 for a in sol):
            continue
        alpha = [Fraction(0)] * len(f.vertex_ids)
        for k, a in zip(subset, sol):
            alpha[k] = a
        yield tuple(alpha)


def cone_decompose(P: Polytope, v: Sequence) -> tuple[int, tuple[Fraction, ...]]:
    """Write ``v`` as a nonnegative combination of one facet's vertices.

    Returns ``(facet_id, alpha)`` with ``alpha`` aligned to
    ``P.facets[facet_id].vertex_ids``; the facet is the lowest-index one
    attaining the norm.
    """
    vv = as_rational_vec(v)
    if all(c == 0 for c in vv):
        raise ZeroVector("cannot decompose the zero vector")
    for fid in _max_facets(P, vv):
        for alpha in _basic_decompositions(P, fid, vv):
            return fid, alpha
    raise AssertionError("a vector attaining a facet maximum lies in that facet's cone")


def integer_cone_decompose(P: Polytope, w: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    """Nonnegative integer coefficients on a facet's primitive classes.

    Returns ``(facet_id, n)`` with ``w == sum n_k * v_{J[k]}`` where
    ``J = P.facets[facet_id].vertex_ids``. Raises :class:`NotInIntegerCone`.
    """
    ww = as_rational_vec(w)
    if any(c.denominator != 1 for c in ww):
        raise NotInIntegerCone(f"{w} is not an integer vector")
    if all(c == 0 for c in ww):
        raise ZeroVector("w must be nonzero")
    for fid in _max_facets(P, ww):
        f = P.facets[fid]
        eps = [P.vertices[j].epsilon for j in f.vertex_ids]
        for alpha in _basic_decompositions(P, fid, ww):
            n = [a / e for a, e in zip(alpha, eps)]
            if all(c.denominator == 1 for c in n):
                return fid, tuple(int(c) for c in n)
        found = _integer_search(P, fid, ww)
        if found is not None:
            return fid, found
    raise NotInIntegerCone(f"{tuple(map(format_rational, ww))} is not a nonnegative integer "
                           "combination of one facet's primitive classes")


def _integer_search(P: Polytope, fid: int, w: RationalVec) -> tuple[int, ...] | None:
    # every class on the facet has lambda(v_j) = epsilon_j, so sum n_j eps_j = lambda(w)
    f = P.facets[fid]
    target = dot(f.lam, w)
    classes = [P.vertices[j].v for j in f.vertex_ids]
    eps = [P.vertices[j].epsilon for j in f.vertex_ids]
    m = P.dim
    n = [0] * len(classes)

    def rec(k: int, budget: Fraction, partial: list[Fraction]):
        if k == len(classes):
            if budget == 0 and list(partial) == list(w):
                return tuple(n)
            return None
        top = int(budget / eps[k])
        for c in range(top, -1, -1):
            n[k] = c
            nxt = [partial[r] + c * classes[k][r] for r in range(m)]
            got = rec(k + 1, budget - c * eps[k], nxt)
            if got is not None:
                return got
        n[k] = 0
        return None

    return rec(0, target, [Fraction(0)] * m)
