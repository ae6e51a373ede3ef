"""Straight closed geodesics on the flat torus and their tube coordinates."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import PlacementFailed

# finest grid step the solver is expected to use; placement must beat 4x this
FINEST_GRID_STEP = 1.0 / 256
RHO_CAP = 0.25
SINGLE_CURVE_SEPARATION = math.inf


@dataclass(frozen=True)
class TubeCoords:
    s: float
    ell: float


@dataclass
class TubeHits:
    """Vectorized result of :meth:`CurveSystem.locate`.

    ``curve`` is -1 where the point is farther than ``rho`` from every curve.
    ``normal`` is the displacement from the nearest curve point to ``x``.
    """

    curve: np.ndarray
    s: np.ndarray
    ell: np.ndarray
    normal: np.ndarray


def _projector(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return np.eye(len(v)) - np.outer(v, v) / (v @ v)


def _complement_projector(vi, vj) -> np.ndarray:
    a = np.array([vi, vj], dtype=float).T
    if np.linalg.matrix_rank(a) < 2:
        return _projector(vi)
    q, _ = np.linalg.qr(a)
    return np.eye(a.shape[0]) - q @ q.T


def line_family_distance(vi, vj, delta: np.ndarray) -> np.ndarray:
    """Distance between the line ``R vi`` and all lattice translates of ``delta + R vj``.

    ``delta`` has shape ``(..., m)``. Closest pairs can be normalized to
    curve parameters in ``[0, 1)``, so a finite window of translates is exact.
    """
    delta = np.asarray(delta, dtype=float)
    m = delta.shape[-1]
    vi = np.asarray(vi)
    vj = np.asarray(vj)
    red = delta - np.floor(delta)
    K = 1 + int(np.abs(vi).max()) + int(np.abs(vj).max()) + math.ceil(math.sqrt(m))
    shifts = np.array(list(itertools.product(range(-K, K + 1), repeat=m)), dtype=float)
    P = _complement_projector(vi, vj)
    pd = red @ P.T
    ps = shifts @ P.T
    best = np.full(red.shape[:-1], np.inf)
    # chunk the shift window to bound memory
    for start in range(0, len(ps), 512):
        chunk = ps[start:start + 512]
        d = np.linalg.norm(pd[..., None, :] + chunk, axis=-1).min(axis=-1)
        best = np.minimum(best, d)
    return best


@dataclass
class CurveSystem:
    offsets: np.ndarray  # (N, m) points in [0,1)^m
    directions: np.ndarray  # (N, m) primitive integer vectors
    separation: float
    rho: float = 0.0
    eps: float = 0.0
    _lines: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        self.offsets = np.asarray(self.offsets, dtype=float)
        self.directions = np.asarray(self.directions, dtype=np.int64)
        if not self._lines:
            self._lines = [self._candidate_lines(i) for i in range(self.n)]

    @property
    def n(self) -> int:
        return len(self.directions)

    @property
    def dim(self) -> int:
        return self.directions.shape[1]

    def sqnorm(self, i: int) -> float:
        v = self.directions[i]
        return float(v @ v)

    def _candidate_lines(self, i: int):
        # integer shifts k whose line b+k+Rv can come within rho_cap of [0,1)^m,
        # deduplicated modulo multiples of v
        v = self.directions[i]
        m = len(v)
        b = self.offsets[i]
        P = _projector(v)
        K = int(np.abs(v).max()) + 3
        ks = np.array(list(itertools.product(range(-K, K + 1), repeat=m)), dtype=float)
        center = np.full(m, 0.5)
        radius = math.sqrt(m) / 2 + RHO_CAP + 1e-9
        dist = np.linalg.norm((center - b - ks) @ P.T, axis=1)
        ks = ks[dist <= radius]
        keys = np.round((ks @ P.T) * (v @ v)).astype(np.int64)
        _, first = np.unique(keys, axis=0, return_index=True)
        ks = ks[np.sort(first)]
        return P, ks

    def curve_point(self, i: int, t, torus: bool = False) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        p = self.offsets[i] + t[..., None] * self.directions[i]
        return p - np.floor(p) if torus else p

    def locate(self, x, cover: bool = False, chunk: int = 1 << 16) -> TubeHits:
        """Tube membership for an array of points of shape ``(..., m)``.

        With ``cover=True`` the parameter ``s`` is measured along the lift, unreduced.
        """
        x = np.asarray(x, dtype=float)
        shape = x.shape[:-1]
        flat = x.reshape(-1, x.shape[-1])
        if len(flat) > chunk:
            parts = [self._locate(flat[a:a + chunk], cover) for a in range(0, len(flat), chunk)]
            return TubeHits(
                curve=np.concatenate([p.curve for p in parts]).reshape(shape),
                s=np.concatenate([p.s for p in parts]).reshape(shape),
                ell=np.concatenate([p.ell for p in parts]).reshape(shape),
                normal=np.concatenate([p.normal for p in parts]).reshape(x.shape),
            )
        return self._locate(x, cover)

    def _locate(self, x: np.ndarray, cover: bool) -> TubeHits:
        shape = x.shape[:-1]
        fl = np.floor(x)
        red = x - fl
        curve = np.full(shape, -1, dtype=np.int64)
        s = np.full(shape, np.nan)
        ell = np.full(shape, np.inf)
        normal = np.zeros(x.shape)
        for i in range(self.n):
            P, ks = self._lines[i]
            v = self.directions[i].astype(float)
            b = self.offsets[i]
            rel = red - b
            n_all = (rel[..., None, :] - ks) @ P.T
            dist = np.linalg.norm(n_all, axis=-1)
            best = dist.argmin(axis=-1)
            d = np.take_along_axis(dist, best[..., None], axis=-1)[..., 0]
            take = (d <= self.rho) & (d < ell)
            if not take.any():
                continue
            k = ks[best]
            nrm = np.take_along_axis(n_all, best[..., None, None], axis=-2)[..., 0, :]
            if cover:
                # normal is orthogonal to v, so this is the parameter of the foot point
                si = np.einsum("...j,j->...", x - b, v) / (v @ v)
            else:
                si = np.einsum("...j,j->...", rel - k, v) / (v @ v)
                si = si - np.floor(si)
            curve = np.where(take, i, curve)
            s = np.where(take, si, s)
            ell = np.where(take, d, ell)
            normal = np.where(take[..., None], nrm, normal)
        return TubeHits(curve=curve, s=s, ell=ell, normal=normal)

    def nearest_distance(self, x) -> np.ndarray:
        """Torus distance from each point to the nearest curve, capped at ``rho``."""
        h = self.locate(x)
        return np.where(h.curve >= 0, h.ell, np.inf)


def min_pair_separation(C: CurveSystem, i: int, j: int) -> float:
    if i == j:
        raise ValueError("need two distinct curves")
    delta = C.offsets[j] - C.offsets[i]
    return float(line_family_distance(C.directions[i], C.directions[j], delta))


def _system_separation(offsets, directions) -> float:
    n = len(directions)
    if n < 2:
        return SINGLE_CURVE_SEPARATION
    return min(
        float(line_family_distance(directions[i], directions[j], offsets[j] - offsets[i]))
        for i in range(n) for j in range(i + 1, n)
    )


def place_curves(classes: Sequence[Sequence[int]], strategy: str = "deterministic",
                 seed: int | None = None, grid: int = 8, sweeps: int = 2,
                 restarts: int = 8) -> CurveSystem:
    """Choose offsets on a ``grid^m`` lattice maximizing the minimum separation.

    Deterministic: greedy placement in class order followed by coordinate
    sweeps. Seeded: the same with randomized curve order over ``restarts``
    trials, keeping the best.
    """
    dirs = np.asarray(classes, dtype=np.int64)
    n, m = dirs.shape
    if m < 3:
        raise ValueError("dimension must be at least 3")
    for v in dirs:
        if math.gcd(*map(int, v)) != 1:
            raise ValueError(f"class {tuple(v)} is not primitive")
    cand = np.array(list(itertools.product(range(grid), repeat=m)), dtype=float) / grid

    def score(idx, offsets, placed):
        # min separation of curve idx at every candidate offset to the placed curves
        out = np.full(len(cand), np.inf)
        for j in placed:
            d = line_family_distance(dirs[j], dirs[idx], cand - offsets[j])
            out = np.minimum(out, d)
        return out

    def run(order):
        offsets = np.zeros((n, m))
        placed = [order[0]]
        for idx in order[1:]:
            sc = score(idx, offsets, placed)
            offsets[idx] = cand[int(np.argmax(sc))]
            placed.append(idx)
        for _ in range(sweeps):
            for idx in order[1:]:
                others = [j for j in order if j != idx]
                sc = score(idx, offsets, others)
                cur = score_one(idx, offsets, others)
                k = int(np.argmax(sc))
                if sc[k] > cur + 1e-12:
                    offsets[idx] = cand[k]
        return offsets, _system_separation(offsets, dirs)

    def score_one(idx, offsets, others):
        return min(float(line_family_distance(dirs[j], dirs[idx], offsets[idx] - offsets[j]))
                   for j in others)

    if n == 1:
        offsets, sep = np.zeros((1, m)), SINGLE_CURVE_SEPARATION
    elif strategy == "deterministic":
        offsets, sep = run(list(range(n)))
    elif strategy == "seeded":
        rng = np.random.default_rng(seed)
        offsets, sep = run(list(range(n)))
        for _ in range(restarts):
            order = [int(k) for k in rng.permutation(n)]
            o2, s2 = run(order)
            if s2 > sep + 1e-12:
                offsets, sep = o2, s2
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    if sep < 4 * FINEST_GRID_STEP:
        raise PlacementFailed(f"best separation {sep:.4g} is below {4 * FINEST_GRID_STEP:.4g}")
    return CurveSystem(offsets=offsets, directions=dirs, separation=sep)


def choose_radii(separation: float) -> tuple[float, float]:
    if not separation > 0:
        raise PlacementFailed("curves intersect (separation 0)")
    rho = min(separation / 2, RHO_CAP) * 0.9
    return rho, rho / 2


def build_curve_system(classes, offsets=None, strategy="deterministic", seed=None) -> CurveSystem:
    """Place (or accept pinned) curves and attach the tube radii."""
    if offsets is None:
        C = place_curves(classes, strategy=strategy, seed=seed)
    else:
        dirs = np.asarray(classes, dtype=np.int64)
        off = np.asarray(offsets, dtype=float)
        off = off - np.floor(off)
        C = CurveSystem(offsets=off, directions=dirs, separation=_system_separation(off, dirs))
        if C.separation < 4 * FINEST_GRID_STEP:
            raise PlacementFailed(f"pinned offsets give separation {C.separation:.4g}")
    C.rho, C.eps = choose_radii(C.separation)
    return C


def tube_locate(C: CurveSystem, x, cover: bool = False) -> tuple[int, TubeCoords] | None:
    h = C.locate(np.asarray(x, dtype=float)[None, :], cover=cover)
    i = int(h.curve[0])
    if i < 0:
        return None
    return i, TubeCoords(s=float(h.s[0]), ell=float(h.ell[0]))


def curve_point(C: CurveSystem, i: int, t: float, torus: bool = False) -> np.ndarray:
    return C.curve_point(i, np.asarray(t), torus=torus)
