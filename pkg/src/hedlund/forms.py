"""Calibrating closed one-forms adapted to the curve tubes.

On the flat torus each facet functional ``lam`` gets the representative

    eta = lam + d(zeta(ell) * g_j)        near curve j,

where ``g_j(x) = c_j . n_j(x)``, ``n_j`` is the normal displacement from the
curve and ``c_j = lam(v_j) v_j / |v_j|^2 - lam`` is orthogonal to ``v_j``.
Inside the inner tube this is exactly ``lam(v_j) v_j / |v_j|^2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate

from .curves import CurveSystem
from .polytope import Polytope, dot


def _B(t):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        return np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)


def _dB(t):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        tt = np.where(t > 0, t, 1.0)
        return np.where(t > 0, np.exp(-1.0 / tt) / (tt * tt), 0.0)


def sigma(t):
    """Smooth step ``B(t) / (B(t) + B(1-t))`` with its derivative."""
    t = np.asarray(t, dtype=float)
    a, b = _B(t), _B(1.0 - t)
    da, db = _dB(t), -_dB(1.0 - t)
    den = a + b
    val = a / den
    der = (da * den - a * (da + db)) / (den * den)
    return val, der


@dataclass(frozen=True)
class BumpProfile:
    eps: float
    rho: float

    def __call__(self, ell):
        return bump_eval(self, ell)


def bump_eval(profile: BumpProfile, ell):
    """``(zeta, dzeta/dell)``: 1 on ``ell <= eps``, 0 on ``ell >= rho``."""
    ell = np.asarray(ell, dtype=float)
    width = profile.rho - profile.eps
    t = np.clip((profile.rho - ell) / width, 0.0, 1.0)
    val, der = sigma(t)
    inner = ell <= profile.eps
    outer = ell >= profile.rho
    val = np.where(inner, 1.0, np.where(outer, 0.0, val))
    der = np.where(inner | outer, 0.0, -der / width)
    if val.ndim == 0:
        return float(val), float(der)
    return val, der


@dataclass(frozen=True)
class GoodForm:
    facet_id: int
    lam_exact: tuple[Fraction, ...]
    base: np.ndarray  # lam as a float covector
    lam_v: np.ndarray  # lam(v_j) for every curve
    tube_cov: np.ndarray  # (N, m) covectors c_j
    inside: np.ndarray  # (N, m) lam(v_j) v_j / |v_j|^2

    def tube_potential(self, j: int, x, curves: CurveSystem) -> np.ndarray:
        """``g_j(x) = c_j . (x - b_j)``; agrees with ``c_j . n_j`` since ``c_j . v_j = 0``."""
        return (np.asarray(x, dtype=float) - curves.offsets[j]) @ self.tube_cov[j]


def build_good_form(P: Polytope, C: CurveSystem, facet_id: int) -> GoodForm:
    lam = P.facets[facet_id].lam
    base = np.array([float(c) for c in lam])
    lam_v, cov, inside = [], [], []
    for v in C.directions:
        vv = tuple(int(c) for c in v)
        lv = dot(lam, vv)
        sq = sum(c * c for c in vv)
        ins = tuple(lv * c / sq for c in vv)
        c = tuple(a - b for a, b in zip(ins, lam))
        assert dot(c, vv) == 0
        lam_v.append(float(lv))
        inside.append([float(x) for x in ins])
        cov.append([float(x) for x in c])
    return GoodForm(facet_id=facet_id, lam_exact=lam, base=base, lam_v=np.array(lam_v),
                    tube_cov=np.array(cov), inside=np.array(inside))


def _hits(C: CurveSystem, x, hits):
    return C.locate(x) if hits is None else hits


def form_eval(form: GoodForm, C: CurveSystem, bump: BumpProfile, x, hits=None) -> np.ndarray:
    """Evaluate ``eta`` at points ``(..., m)``; returns covectors ``(..., m)``."""
    x = np.asarray(x, dtype=float)
    h = _hits(C, x, hits)
    out = np.broadcast_to(form.base, x.shape).copy()
    j = h.curve
    inner = (j >= 0) & (h.ell <= bump.eps)
    ann = (j >= 0) & ~inner
    if inner.any():
        out[inner] = form.inside[j[inner]]
    if ann.any():
        jj = j[ann]
        ell = h.ell[ann]
        nrm = h.normal[ann]
        cov = form.tube_cov[jj]
        g = np.einsum("ij,ij->i", cov, nrm)
        z, dz = bump_eval(bump, ell)
        out[ann] = form.base + (g * dz / ell)[:, None] * nrm + z[:, None] * cov
    return out


def form_potential(form: GoodForm, C: CurveSystem, bump: BumpProfile, x, hits=None) -> np.ndarray:
    """Primitive of ``eta`` on the cover: ``lam . x + zeta(ell) g_j(x)``."""
    x = np.asarray(x, dtype=float)
    h = _hits(C, x, hits)
    out = x @ form.base
    j = h.curve
    mask = j >= 0
    if mask.any():
        jj = j[mask]
        g = np.einsum("ij,ij->i", form.tube_cov[jj], h.normal[mask])
        z, _ = bump_eval(bump, h.ell[mask])
        out[mask] = out[mask] + z * g
    return out


def period(form: GoodForm, C: CurveSystem, bump: BumpProfile, j: int, tol: float = 1e-12) -> float:
    """Integral of ``eta`` over one period of curve ``j``."""
    v = C.directions[j].astype(float)

    def integrand(t):
        p = C.curve_point(j, np.array([t]))
        return float(form_eval(form, C, bump, p)[0] @ v)

    val, _ = integrate.quad(integrand, 0.0, 1.0, epsabs=tol, epsrel=tol, limit=200)
    return val
