"""Run orchestration with a content-addressed cache and a deterministic manifest."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import os
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, canonical_json
from .curves import build_curve_system
from .errors import CertificationFailed, ConfigError
from .export import load_distance_field, save_distance_field
from .forms import BumpProfile, build_good_form
from .lemmapath import build_lemma_path, verify_bound
from .metric import (HedlundMetric, calibrate_constants, certify_calibration, certify_H1,
                     polyline_length)
from .polytope import Polytope, format_rational, from_vertices, integer_cone_decompose
from .solver.grid import LatticeGraph, build_grid
from .solver.stencil import stencil_offsets
from .solver.paths import diameter_field, diameter_upper, line_gap_D, shortest_distance
from .stablenorm import ConstantReport, SandwichReport, Tolerances, sandwich_check

log = logging.getLogger(__name__)

CACHE_ENV = "HEDLUND_CACHE_DIR"


def cache_dir() -> Path:
    root = os.environ.get(CACHE_ENV)
    return Path(root) if root else Path.home() / ".cache" / "hedlund"


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    tmp.replace(path)


def load_polytope(cfg: RunConfig) -> Polytope:
    return from_vertices([list(v) for v in cfg.vertices])


def build_curves(cfg: RunConfig, P: Polytope, offsets=None):
    if offsets is None and cfg.offsets is not None:
        if len(cfg.offsets) != P.n_curves:
            raise ConfigError(f"offsets: expected {P.n_curves} offsets (one per curve), got {len(cfg.offsets)}")
        offsets = [[float(c) for c in o] for o in cfg.offsets]
    return build_curve_system(P.classes, offsets=offsets, strategy=cfg.placement, seed=cfg.seed)


@dataclasses.dataclass
class Certificates:
    h1: list[dict]
    calibration: list[dict]
    lengths: list[dict]

    @property
    def passed(self) -> bool:
        return (all(r["passed"] for r in self.h1) and all(r["passed"] for r in self.calibration)
                and all(r["passed"] for r in self.lengths))


def certify(H: HedlundMetric, cfg: RunConfig) -> Certificates:
    """(H1) at two resolutions, calibration at the sampling and double resolution, curve lengths."""
    tol = cfg.tolerances
    h1 = []
    for res in sorted({max(8, cfg.sampling_res // 2), cfg.sampling_res}):
        rep = certify_H1(H, res, on_tol=tol.h1_on_curve, raise_on_fail=False)
        h1.append(dataclasses.asdict(rep))
    cal = []
    for res in (cfg.sampling_res, 2 * cfg.sampling_res):
        rep = certify_calibration(H, res, tol=tol.calibration, attain_tol=tol.attain, raise_on_fail=False)
        cal.append(dataclasses.asdict(rep))
    lengths = []
    t = np.array([0.0, 1.0])
    for i in range(H.curves.n):
        L = polyline_length(H, H.curves.curve_point(i, t))
        eps = float(H.polytope.epsilons[i])
        lengths.append({"curve": i, "length": L, "epsilon": format_rational(H.polytope.epsilons[i]),
                        "error": abs(L - eps), "tol": tol.length, "passed": abs(L - eps) <= tol.length})
    return Certificates(h1=h1, calibration=cal, lengths=lengths)


class Run:
    """Everything derived from one config, built lazily and cached on disk."""

    def __init__(self, cfg: RunConfig, cache: Path | None = None):
        self.cfg = cfg
        self.cache = cache or cache_dir()
        self.out = Path(cfg.out)
        self._P: Polytope | None = None
        self._H: HedlundMetric | None = None
        self._certs: Certificates | None = None
        self._graph: LatticeGraph | None = None
        self._consts: ConstantReport | None = None
        self.cache_hits: list[str] = []
        self.artifacts: dict[str, str] = {}

    # stages
    @property
    def polytope(self) -> Polytope:
        if self._P is None:
            self._P = load_polytope(self.cfg)
        return self._P

    def _metric_path(self) -> Path:
        return self.cache / f"metric-{self.cfg.metric_hash}.json"

    @property
    def metric(self) -> HedlundMetric:
        if self._H is None:
            self._H, self._certs = self._load_metric() or self._build_metric()
        return self._H

    @property
    def certificates(self) -> Certificates:
        self.metric
        return self._certs

    def _build_metric(self):
        P = self.polytope
        C = build_curves(self.cfg, P)
        H = calibrate_constants(P, C, res=self.cfg.sampling_res, inflation=self.cfg.inflation)
        certs = certify(H, self.cfg)
        self._save_metric(H, certs)
        return H, certs

    def _cert_tolerances(self) -> dict:
        t = self.cfg.tolerances
        return {"h1_on_curve": t.h1_on_curve, "calibration": t.calibration, "attain": t.attain,
                "length": t.length}

    def _save_metric(self, H: HedlundMetric, certs: Certificates) -> None:
        _write_json(self._metric_path(), {"metric_hash": self.cfg.metric_hash, "manifest": H.manifest(),
                                          "certificates": dataclasses.asdict(certs),
                                          "certificate_tolerances": self._cert_tolerances()})

    def _load_metric(self):
        path = self._metric_path()
        if not path.exists():
            return None
        data = json.loads(path.read_text())
        if data.get("metric_hash") != self.cfg.metric_hash:
            return None
        man = data["manifest"]
        P = self.polytope
        C = build_curves(self.cfg, P, offsets=man["offsets"])
        forms = [build_good_form(P, C, i) for i in range(len(P.facets))]
        H = HedlundMetric(polytope=P, curves=C, forms=forms, bump=BumpProfile(eps=C.eps, rho=C.rho),
                          omega=man["omega"], omega_i=np.array(man["omega_i"]), C_i=np.array(man["C_i"]),
                          e_const=man["e"], inflation=man["inflation"], sampling_res=man["sampling_res"])
        self.cache_hits.append("metric")
        if data.get("certificate_tolerances") != self._cert_tolerances():
            # same metric, different acceptance thresholds: re-certify
            certs = certify(H, self.cfg)
            self._save_metric(H, certs)
            return H, certs
        return H, Certificates(**data["certificates"])

    @property
    def graph(self) -> LatticeGraph:
        if self._graph is None:
            path = self.cache / f"grid-{self.cfg.grid_hash}.npz"
            if path.exists():
                z = np.load(path)
                self._graph = LatticeGraph(self.metric, self.cfg.res, self.cfg.stencil,
                                           np.ascontiguousarray(stencil_offsets(self.metric.dim, self.cfg.stencil)),
                                           z["wtable"], z["pot_lin"], z["pot_tab"], self.cfg.budget)
                self.cache_hits.append("grid")
            else:
                self._graph = build_grid(self.metric, self.cfg.res, self.cfg.stencil, self.cfg.budget)
                path.parent.mkdir(parents=True, exist_ok=True)
                with open(path.with_suffix(".tmp"), "wb") as fh:
                    np.savez(fh, wtable=self._graph.wtable, pot_lin=self._graph.pot_lin,
                             pot_tab=self._graph.pot_tab)
                path.with_suffix(".tmp").replace(path)
        return self._graph

    @property
    def constants(self) -> ConstantReport:
        if self._consts is None:
            g = self.graph
            base = self.cache / f"field-{self.cfg.grid_hash}-diameter"
            fld = load_distance_field(base, self.cfg.grid_hash)
            if fld is None:
                fld = diameter_field(g)
                save_distance_field(base, fld, g.R, self.cfg.grid_hash)
            else:
                self.cache_hits.append("diameter-field")
            diam = diameter_upper(g, field_=fld)
            dpath = self.cache / f"linegap-{self.cfg.grid_hash}.json"
            if dpath.exists():
                D = json.loads(dpath.read_text())["D"]
                self.cache_hits.append("line-gap")
            else:
                D = line_gap_D(g, self.metric.curves)
                _write_json(dpath, {"D": D})
            P = self.polytope
            self._consts = ConstantReport(diam=diam, D=D, e=self.metric.e_const, kappa=P.kappa,
                                          C_hat=2.0 * diam + P.kappa * (D + self.metric.e_const),
                                          overhead=g.overhead)
        return self._consts

    # commands
    def tolerances(self) -> Tolerances:
        t = self.cfg.tolerances
        return Tolerances(low=t.low, quad=t.quad, monotone=t.monotone, trend_ratio=t.trend_ratio,
                          trend_slack=t.trend_slack)

    def sandwich(self, w) -> SandwichReport:
        return sandwich_check(self.graph, w, self.cfg.n_max, self.constants.C_hat, self.tolerances(),
                              workers=self.cfg.workers)

    def lemma_path(self, w):
        P = self.polytope
        fid, coeffs = integer_cone_decompose(P, list(w))
        x = np.array([float(c) for c in self.cfg.start_point])
        path = build_lemma_path(self.graph, x, fid, coeffs)
        k = self.constants
        rep = verify_bound(self.graph, path, k.C_hat, k.diam, k.D, tol=self.cfg.tolerances.lemma)
        d_hat, _ = shortest_distance(self.graph, x, x + np.asarray(w, dtype=float))
        return path, rep, d_hat

    # manifest
    def manifest(self, extra: dict | None = None) -> dict:
        P, H = self.polytope, self.metric
        man = {
            "version": __version__,
            "config_hash": self.cfg.config_hash,
            "metric_hash": self.cfg.metric_hash,
            "polytope": {
                "vertices": [[format_rational(c) for c in v.v_tilde] for v in P.vertices],
                "classes": [list(c) for c in P.classes],
                "epsilon": [format_rational(e) for e in P.epsilons],
                "kappa": P.kappa,
                "facets": [[format_rational(c) for c in f.lam] for f in P.facets],
            },
            "metric": H.manifest(),
            "certificates": dataclasses.asdict(self.certificates),
            "certificates_passed": self.certificates.passed,
            "tolerances": dataclasses.asdict(self.cfg.tolerances),
        }
        if self._consts is not None:
            man["constants"] = dataclasses.asdict(self._consts)
            man["grid"] = {"res": self.cfg.res, "stencil": self.cfg.stencil, "grid_hash": self.cfg.grid_hash}
        if extra:
            man.update(extra)
        man["artifacts"] = dict(sorted(self.artifacts.items()))
        man["manifest_hash"] = hashlib.sha256(canonical_json(man).encode()).hexdigest()
        return man

    def write_manifest(self, extra: dict | None = None) -> dict:
        man = self.manifest(extra)
        _write_json(self.out / "manifest.json", man)
        return man


def raise_if_failed(certs: Certificates) -> None:
    if certs.passed:
        return
    bad = []
    for r in certs.h1:
        if not r["passed"]:
            bad.append(f"(H1) at res {r['resolution']}: on-curve error {r['on_curve_max_error']:.3g}, "
                       f"worst off-curve ratio {r['off_curve_worst_ratio']:.6g} at {r['worst_location']}")
    for r in certs.calibration:
        if not r["passed"]:
            k = int(np.argmax(r["max_values"]))
            bad.append(f"calibration at res {r['resolution']}: facet {k} reaches {r['max_values'][k]:.6g} "
                       f"at {r['argmax'][k]}")
    for r in certs.lengths:
        if not r["passed"]:
            bad.append(f"curve {r['curve']} length {r['length']:.8g} != {r['epsilon']}")
    raise CertificationFailed("; ".join(bad), certs)
