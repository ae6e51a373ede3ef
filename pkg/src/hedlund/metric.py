"""The Hedlund conformal factor and its certificates.

The dual metric is ``g* = F rho*`` with ``rho`` flat, so curve speeds scale by
``F**-0.5`` and the dual norm of a covector ``a`` at ``x`` is
``sqrt(F(x)) |a|``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .curves import CurveSystem
from .errors import CertificationFailed, SamplingTooCoarse
from .forms import BumpProfile, GoodForm, build_good_form, bump_eval, form_eval, form_potential
from .polytope import Polytope

OMEGA_I_FLOOR = 1.1
E_FACTOR = 1.01


def grid_points(res: int, m: int) -> np.ndarray:
    """Nodes ``k / res`` of the unit cell, shape ``(res**m, m)``, last axis fastest."""
    ax = np.arange(res) / res
    mesh = np.meshgrid(*([ax] * m), indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, m)


def _normal_frame(v: np.ndarray) -> np.ndarray:
    m = len(v)
    q, _ = np.linalg.qr(np.column_stack([v, np.eye(m)]))
    return q[:, 1:m].T  # (m-1, m) orthonormal rows spanning v-perp


def _sphere_dirs(k: int, count: int, seed: int = 0) -> np.ndarray:
    if k == 2:
        a = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(a), np.sin(a)], axis=1)
    d = np.random.default_rng(seed).normal(size=(count, k))
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def tube_samples(C: CurveSystem, i: int, radii: np.ndarray, n_s: int, n_dir: int) -> np.ndarray:
    """Points ``b_i + s v_i + r u`` on a polar lattice around curve ``i``."""
    v = C.directions[i].astype(float)
    frame = _normal_frame(v)
    dirs = _sphere_dirs(len(v) - 1, n_dir) @ frame
    s = np.arange(n_s) / n_s
    base = C.curve_point(i, s)
    pts = base[:, None, None, :] + radii[None, :, None, None] * dirs[None, None, :, :]
    return pts.reshape(-1, len(v))


@dataclass
class HedlundMetric:
    polytope: Polytope
    curves: CurveSystem
    forms: list[GoodForm]
    bump: BumpProfile
    omega: float
    omega_i: np.ndarray
    C_i: np.ndarray
    e_const: float
    inflation: float
    sampling_res: int
    sq: np.ndarray = field(init=False, repr=False)  # |v_i|^2
    eps_v: np.ndarray = field(init=False, repr=False)  # epsilon_i as floats

    def __post_init__(self):
        self.sq = np.array([self.curves.sqnorm(i) for i in range(self.curves.n)])
        self.eps_v = np.array([float(e) for e in self.polytope.epsilons])
        self.omega_i = np.asarray(self.omega_i, dtype=float)
        self.C_i = np.asarray(self.C_i, dtype=float)

    @property
    def dim(self) -> int:
        return self.curves.dim

    def F(self, x, hits=None) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        h = self.curves.locate(x) if hits is None else hits
        out = np.full(x.shape[:-1], 1.0 / self.omega)
        j = h.curve
        mask = j >= 0
        if mask.any():
            jj = j[mask]
            ell = h.ell[mask]
            hi = (self.sq[jj] / self.eps_v[jj] ** 2) * np.exp(-self.C_i[jj] * ell * ell)
            z, _ = bump_eval(self.bump, ell)
            out[mask] = z * hi + (1.0 - z) / self.omega
        return out

    def length_factor(self, x, hits=None) -> np.ndarray:
        return self.F(x, hits) ** -0.5

    def eta(self, i: int, x, hits=None) -> np.ndarray:
        return form_eval(self.forms[i], self.curves, self.bump, x, hits)

    def potential(self, i: int, x, hits=None) -> np.ndarray:
        return form_potential(self.forms[i], self.curves, self.bump, x, hits)

    # solver hooks
    @property
    def feature_scale(self) -> float:
        return self.curves.rho - self.curves.eps

    def refine_mask(self, midpoints: np.ndarray, halflen: np.ndarray) -> np.ndarray:
        """True where a segment may enter a tube, i.e. where the factor is not constant."""
        h = _padded_locate(self.curves, midpoints, halflen)
        return h

    def calibrating_potentials(self, res: int, R: int | None = None):
        """Potentials of all ``eta_i`` as ``(lin, tables)`` for goal-directed search.

        ``Phi_i`` at global node ``G`` equals ``lin[i] . G + tables[i][G mod res]``.
        """
        pts = grid_points(res, self.dim)
        hits = self.curves.locate(pts)
        lin = np.array([f.base for f in self.forms]) / res
        tabs = np.array([self.potential(i, pts, hits) - pts @ self.forms[i].base
                         for i in range(len(self.forms))])
        return lin, tabs

    def manifest(self) -> dict:
        return {
            "omega": self.omega,
            "omega_i": [float(x) for x in self.omega_i],
            "C_i": [float(x) for x in self.C_i],
            "e": self.e_const,
            "inflation": self.inflation,
            "sampling_res": self.sampling_res,
            "rho": self.curves.rho,
            "eps": self.curves.eps,
            "epsilon_i": [str(e) for e in self.polytope.epsilons],
            "kappa": self.polytope.kappa,
            "offsets": self.curves.offsets.tolist(),
            "directions": self.curves.directions.tolist(),
            "separation": self.curves.separation,
        }


def _padded_locate(C: CurveSystem, midpoints, halflen) -> np.ndarray:
    # a segment of half-length r around p meets tube j iff dist(p, line_j) < rho + r;
    # temporarily widen the tube radius for the membership test
    saved = C.rho
    try:
        C.rho = saved + float(np.max(halflen)) if np.size(halflen) else saved
        h = C.locate(midpoints)
    finally:
        C.rho = saved
    return (h.curve >= 0) & (h.ell < saved + halflen)


@dataclass(frozen=True)
class ConstantMetric:
    """``F`` identically ``c``: distances are Euclidean divided by ``sqrt(c)``."""

    c: float
    m: int

    feature_scale = math.inf

    @property
    def dim(self) -> int:
        return self.m

    def F(self, x, hits=None):
        return np.full(np.asarray(x).shape[:-1], float(self.c))

    def length_factor(self, x, hits=None):
        return np.full(np.asarray(x).shape[:-1], self.c ** -0.5)

    def refine_mask(self, midpoints, halflen):
        return np.zeros(np.asarray(midpoints).shape[:-1], dtype=bool)

    def calibrating_potentials(self, res: int, R: int = 2):
        # constant covectors of dual norm 1 along the normalized stencil directions
        offs = [o for o in itertools.product(range(-R, R + 1), repeat=self.m) if any(o)]
        dirs = np.array(offs, dtype=float)
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
        dirs = np.unique(np.round(dirs, 15), axis=0)
        lin = dirs * (self.c ** -0.5) / res
        return lin, np.zeros((len(dirs), res ** self.m))


def calibrate_constants(P: Polytope, C: CurveSystem, res: int = 64, inflation: float = 1.05,
                        forms: list[GoodForm] | None = None) -> HedlundMetric:
    """Estimate Omega, Omega_i, C_i by sampled maximization and build the metric."""
    if inflation < 1:
        raise ValueError("inflation must be >= 1")
    if 1.0 / res > C.eps / 4:
        raise SamplingTooCoarse(f"grid step 1/{res} exceeds eps/4 = {C.eps / 4:.4g}")
    bump = BumpProfile(eps=C.eps, rho=C.rho)
    if forms is None:
        forms = [build_good_form(P, C, i) for i in range(len(P.facets))]
    m = C.dim

    pts = [grid_points(res, m)]
    radii = np.linspace(0.0, C.rho, 33)
    n_dir = 32 if m == 3 else 64
    for i in range(C.n):
        n_s = max(8, int(math.ceil(res * math.sqrt(C.sqnorm(i)) / 4)))
        pts.append(tube_samples(C, i, radii, n_s, n_dir))
    pts = np.concatenate(pts)
    hits = C.locate(pts)
    eta_sq = np.max([np.einsum("ij,ij->i", e, e)
                     for e in (form_eval(f, C, bump, pts, hits) for f in forms)], axis=0)

    outside = (hits.curve < 0) | (hits.ell >= C.eps)
    omega = inflation * float(eta_sq[outside].max())

    eps_v = np.array([float(e) for e in P.epsilons])
    omega_i = np.empty(C.n)
    for i in range(C.n):
        sel = hits.curve == i
        peak = float(eta_sq[sel].max()) * C.sqnorm(i) if sel.any() else 0.0
        omega_i[i] = max(inflation * peak, OMEGA_I_FLOOR * eps_v[i] ** 2)
    C_i = np.log(omega_i / eps_v ** 2) / C.eps ** 2
    e_const = E_FACTOR * float(eps_v.max())
    return HedlundMetric(polytope=P, curves=C, forms=forms, bump=bump, omega=omega,
                         omega_i=omega_i, C_i=C_i, e_const=e_const, inflation=inflation,
                         sampling_res=res)


def F_eval(H: HedlundMetric, x) -> float | np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(H.F(x[None, :])[0])
    return H.F(x)


def length_factor(H, x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return float(H.length_factor(x[None, :])[0])
    return H.length_factor(x)


def _simpson(fa, fm, fb, w):
    return w * (fa + 4 * fm + fb) / 6


def polyline_length(H, pts, rtol: float = 1e-6, max_depth: int = 40) -> float:
    """Metric length of a polyline by vectorized adaptive Simpson per segment."""
    pts = np.asarray(pts, dtype=float)
    if len(pts) < 2:
        return 0.0
    a = pts[:-1]
    d = pts[1:] - pts[:-1]
    seglen = np.linalg.norm(d, axis=1)
    keep = seglen > 0
    a, d, seglen = a[keep], d[keep], seglen[keep]
    if not len(a):
        return 0.0
    scale = H.feature_scale
    panels = np.ones(len(a), dtype=np.int64) if not math.isfinite(scale) else \
        np.maximum(2, np.ceil(seglen / (scale / 4)).astype(np.int64))
    seg = np.repeat(np.arange(len(a)), panels)
    offs = np.concatenate([np.arange(p) for p in panels])
    lo = offs / panels[seg]
    hi = (offs + 1) / panels[seg]

    def f(sidx, t):
        return seglen[sidx] * H.length_factor(a[sidx] + t[:, None] * d[sidx])

    fa, fb, fm = f(seg, lo), f(seg, hi), f(seg, (lo + hi) / 2)
    whole = _simpson(fa, fm, fb, hi - lo)
    tol = rtol * np.abs(whole) + 1e-15
    total = 0.0
    for _ in range(max_depth):
        if not len(seg):
            break
        mid = (lo + hi) / 2
        flm = f(seg, (lo + mid) / 2)
        frm = f(seg, (mid + hi) / 2)
        left = _simpson(fa, flm, fm, mid - lo)
        right = _simpson(fm, frm, fb, hi - mid)
        err = left + right - whole
        done = np.abs(err) <= 15 * tol
        total += float(np.sum((left + right + err / 15)[done]))
        nd = ~done
        seg = np.concatenate([seg[nd], seg[nd]])
        lo, hi = np.concatenate([lo[nd], mid[nd]]), np.concatenate([mid[nd], hi[nd]])
        fa, fb = np.concatenate([fa[nd], fm[nd]]), np.concatenate([fm[nd], fb[nd]])
        fm = np.concatenate([flm[nd], frm[nd]])
        whole = np.concatenate([left[nd], right[nd]])
        tol = np.concatenate([tol[nd], tol[nd]]) / 2
    if len(seg):
        total += float(np.sum(whole))
    return total


@dataclass
class H1Report:
    passed: bool
    on_curve_max_error: float
    off_curve_worst_ratio: float  # max of g*(ds,ds) * eps_i^2 off the curve; must be < 1
    envelope_violation: float
    worst_location: list[float] | None
    n_samples: int
    resolution: int


def _tube_sample_set(H: HedlundMetric, res: int, outer: float, include_grid: bool = True):
    C = H.curves
    m = C.dim
    pts = [grid_points(res, m)] if include_grid else []
    radii = np.linspace(0.0, outer, 17)
    for i in range(C.n):
        n_s = max(8, int(math.ceil(res * math.sqrt(C.sqnorm(i)) / 4)))
        pts.append(tube_samples(C, i, radii, n_s, 16 if m == 3 else 32))
    return np.concatenate(pts)


def certify_H1(H: HedlundMetric, res: int = 64, on_tol: float = 1e-9, off_floor: float = 1e-6,
               raise_on_fail: bool = True) -> H1Report:
    """Check ``g*(ds_i, ds_i) = F / |v_i|^2`` peaks at ``1/eps_i^2`` exactly on the curve."""
    C = H.curves
    pts = _tube_sample_set(H, res, C.eps)
    hits = C.locate(pts)
    sel = (hits.curve >= 0) & (hits.ell < C.eps)
    pts, j, ell = pts[sel], hits.curve[sel], hits.ell[sel]
    Fv = H.F(pts)
    gss = Fv / H.sq[j]
    target = 1.0 / H.eps_v[j] ** 2
    on = ell <= 1e-12
    on_err = float(np.max(np.abs(gss[on] - target[on]))) if on.any() else math.inf
    off = ell > off_floor
    ratio = gss[off] / target[off]
    worst_ratio = float(ratio.max()) if off.any() else 0.0
    envelope = np.exp(-H.C_i[j[off]] * ell[off] ** 2)
    env_violation = float(np.max(ratio - envelope)) if off.any() else 0.0
    passed = on_err <= on_tol and worst_ratio < 1.0 and env_violation <= 1e-12
    worst = None
    if off.any():
        worst = pts[off][int(np.argmax(ratio))].tolist()
    rep = H1Report(passed=passed, on_curve_max_error=on_err, off_curve_worst_ratio=worst_ratio,
                   envelope_violation=env_violation, worst_location=worst,
                   n_samples=int(sel.sum()), resolution=res)
    if raise_on_fail and not passed:
        raise CertificationFailed(f"(H1) failed: {rep}", rep)
    return rep


@dataclass
class CalibrationReport:
    passed: bool
    tol: float
    max_values: list[float]
    argmax: list[list[float]]
    attained: list[float]  # per facet, value at its own curve points (should be 1)
    attain_error: float
    resolution: int


def certify_calibration(H: HedlundMetric, res: int = 64, tol: float = 0.02,
                        attain_tol: float = 1e-6, raise_on_fail: bool = True) -> CalibrationReport:
    """Dual norm ``sqrt(F)|eta_i|`` stays below ``1 + tol`` and equals 1 on the facet's curves."""
    C = H.curves
    P = H.polytope
    pts = _tube_sample_set(H, res, C.rho)
    hits = C.locate(pts)
    sF = np.sqrt(H.F(pts, hits))
    maxima, argmax = [], []
    for i in range(len(H.forms)):
        e = H.eta(i, pts, hits)
        val = sF * np.linalg.norm(e, axis=1)
        k = int(np.argmax(val))
        maxima.append(float(val[k]))
        argmax.append(pts[k].tolist())
    t = np.arange(16) / 16
    attained, worst_err = [], 0.0
    for i, f in enumerate(P.facets):
        vals = []
        for vid in f.vertex_ids:
            j, _ = P.curve_of(vid)
            cp = C.curve_point(j, t, torus=True)
            val = np.sqrt(H.F(cp)) * np.linalg.norm(H.eta(i, cp), axis=1)
            vals.append(val)
        vals = np.concatenate(vals)
        attained.append(float(vals.min()))
        worst_err = max(worst_err, float(np.max(np.abs(vals - 1.0))))
    passed = max(maxima) <= 1 + tol and worst_err <= attain_tol
    rep = CalibrationReport(passed=passed, tol=tol, max_values=maxima, argmax=argmax,
                            attained=attained, attain_error=worst_err, resolution=res)
    if raise_on_fail and not passed:
        raise CertificationFailed(f"calibration failed: max {max(maxima):.6g}", rep)
    return rep


def build_metric(P: Polytope, C: CurveSystem, res: int = 64, inflation: float = 1.05) -> HedlundMetric:
    return calibrate_constants(P, C, res=res, inflation=inflation)
