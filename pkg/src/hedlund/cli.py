"""Command line interface: validate, build, stable-norm, lemma-path, export-field, report."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import config as config_mod
from .config import RunConfig, parse_w
from .errors import CertificationFailed, ConfigError, HedlundError
from .export import sample_field, write_volume
from .pipeline import Run, build_curves, raise_if_failed

log = logging.getLogger("hedlund")

EXIT_OK = 0
EXIT_CERT_FAILED = 1
EXIT_ERROR = 2


def _w_label(w) -> str:
    return "_".join(str(c) if c >= 0 else f"m{-c}" for c in w)


def _load(args) -> RunConfig:
    cfg = config_mod.load(args.config)
    changes = {}
    for flag, name in (("out", "out"), ("res", "res"), ("stencil", "stencil"), ("nmax", "n_max"),
                       ("budget", "budget"), ("seed", "seed"), ("workers", "workers")):
        val = getattr(args, flag, None)
        if val is not None:
            changes[name] = val
    return cfg.replace(**changes) if changes else cfg


def cmd_validate(args) -> int:
    cfg = _load(args)
    run = Run(cfg)
    P = run.polytope
    C = build_curves(cfg, P)
    print(f"polytope: {len(P.vertices)} vertices, {len(P.facets)} facets, kappa = {P.kappa}")
    for d in P.vertices[:P.n_curves]:
        print(f"  class {d.v}  epsilon = {d.epsilon}")
    print(f"curves: separation {C.separation:.6g}, rho {C.rho:.6g}, eps {C.eps:.6g}")
    print("validate: pass")
    return EXIT_OK


def cmd_build(args) -> int:
    run = Run(_load(args))
    certs = run.certificates
    man = run.write_manifest()
    print(f"metric: Omega {run.metric.omega:.6g}, e {run.metric.e_const:.6g}, C_i {[round(float(c), 6) for c in run.metric.C_i]}")
    print(f"certificates: {'pass' if certs.passed else 'FAIL'}  (manifest {man['manifest_hash'][:16]})")
    raise_if_failed(certs)
    return EXIT_OK


def cmd_stable_norm(args) -> int:
    run = Run(_load(args))
    raise_if_failed(run.certificates)
    cfg = run.cfg
    if not cfg.w:
        print("stable-norm: no test vectors configured")
        run.write_manifest()
        return EXIT_OK
    consts = run.constants
    print(f"constants: diam {consts.diam:.6g}, D {consts.D:.6g}, e {consts.e:.6g}, "
          f"kappa {consts.kappa}, C {consts.C_hat:.6g}, eta_R {consts.overhead:.4g}")
    ok = True
    summaries = {}
    for w in cfg.w:
        rep = run.sandwich(w)
        label = _w_label(w)
        csv_path = run.out / f"sandwich_{label}.csv"
        json_path = run.out / f"sandwich_{label}.json"
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(rep.to_csv())
        json_path.write_text(json.dumps(rep.to_dict(), indent=2, sort_keys=True) + "\n")
        run.artifacts[f"sandwich_{label}_csv"] = csv_path.name
        run.artifacts[f"sandwich_{label}_json"] = json_path.name
        summaries[label] = {"passed": rep.passed, "trend": rep.trend, "lambda": str(rep.lambda_w)}
        ok &= rep.passed
        vals = ", ".join("-" if v is None else f"{v:.5f}" for v in rep.f_hat_over_n)
        print(f"w = {w}: lambda = {rep.lambda_w}, f/n = [{vals}]  "
              f"{'pass' if rep.passed else 'FAIL'} (trend {'ok' if rep.trend else 'not met'})")
    run.write_manifest({"stable_norm": summaries})
    return EXIT_OK if ok else EXIT_CERT_FAILED


def cmd_lemma_path(args) -> int:
    run = Run(_load(args))
    raise_if_failed(run.certificates)
    ws = [parse_w(args.w, run.cfg.dimension)] if args.w else list(run.cfg.w)
    ok = True
    summaries = {}
    for w in ws:
        path, rep, d_hat = run.lemma_path(w)
        label = _w_label(w)
        csv_path = run.out / f"lemma_path_{label}.csv"
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        csv_path.write_text(path.to_csv())
        report = {"w": list(w), "facet_id": path.facet_id, "coefficients": list(path.coefficients),
                  "total_length": rep.total_length, "bound": rep.bound, "tol": rep.tol,
                  "lambda_w": rep.lambda_w, "C_hat": rep.C_hat, "passed": rep.passed,
                  "solver_distance": d_hat, "ledger": rep.ledger}
        (run.out / f"lemma_path_{label}.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        run.artifacts[f"lemma_path_{label}_csv"] = csv_path.name
        summaries[label] = {"passed": rep.passed, "length": rep.total_length, "bound": rep.bound}
        ok &= rep.passed
        print(f"w = {w}: length {rep.total_length:.6g} <= {rep.bound:.6g} + {rep.tol:g}: "
              f"{'pass' if rep.passed else 'FAIL'}  (solver distance {d_hat:.6g})")
    run.write_manifest({"lemma_path": summaries})
    return EXIT_OK if ok else EXIT_CERT_FAILED


def cmd_export_field(args) -> int:
    run = Run(_load(args))
    res = args.res or run.cfg.res
    vals, meta = sample_field(run.metric, args.field, res)
    meta["manifest_hash"] = run.cfg.metric_hash
    base = run.out / f"field_{args.field}_{res}"
    payload, sidecar = write_volume(base, vals, meta)
    print(f"wrote {payload} ({payload.stat().st_size} bytes) and {sidecar}")
    return EXIT_OK


def cmd_report(args) -> int:
    cfg = _load(args)
    path = Path(cfg.out) / "manifest.json"
    if not path.exists():
        print(f"no manifest at {path}; run 'hedlund build' first", file=sys.stderr)
        return EXIT_ERROR
    man = json.loads(path.read_text())
    m = man["metric"]
    print(f"config {man['config_hash'][:16]}  metric {man['metric_hash'][:16]}")
    print(f"kappa {man['polytope']['kappa']}, epsilon_i {man['polytope']['epsilon']}")
    print(f"rho {m['rho']:.6g}, eps {m['eps']:.6g}, Omega {m['omega']:.6g}, e {m['e']:.6g}")
    print(f"Omega_i {m['omega_i']}")
    print(f"C_i {m['C_i']}")
    if "constants" in man:
        k = man["constants"]
        print(f"diam {k['diam']:.6g}, D {k['D']:.6g}, C {k['C_hat']:.6g}")
    failed = not man["certificates_passed"]
    print(f"certificates: {'FAIL' if failed else 'pass'}")
    for section in ("stable_norm", "lemma_path"):
        for label, s in man.get(section, {}).items():
            print(f"{section} {label}: {'pass' if s['passed'] else 'FAIL'}")
            failed |= not s["passed"]
    return EXIT_CERT_FAILED if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="run configuration (JSON)")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--res", type=int, metavar="N", help="solver grid nodes per unit cell")
    common.add_argument("--stencil", type=int, metavar="R", help="stencil radius")
    common.add_argument("--nmax", type=int, metavar="N", help="largest multiple n")
    common.add_argument("--budget", type=int, metavar="NODES", help="node budget per search box")
    common.add_argument("--seed", type=int, metavar="S", help="placement seed")
    common.add_argument("--workers", type=int, metavar="K", help="parallel solver threads")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="hedlund", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common], help="check the polytope and curve placement")
    sub.add_parser("build", parents=[common], help="calibrate the metric and certify it")
    sub.add_parser("stable-norm", parents=[common], help="stable-norm sandwich for each configured w")
    lp = sub.add_parser("lemma-path", parents=[common], help="explicit path and its length bound")
    lp.add_argument("--w", metavar="W", help="vector like 1,1,0 (default: all configured w)")
    ex = sub.add_parser("export-field", parents=[common], help="write F, phi or eta<i> as a volume")
    ex.add_argument("--field", required=True, help="F, phi or eta<i>")
    sub.add_parser("report", parents=[common], help="summarize the manifest in the output directory")
    return p


COMMANDS = {
    "validate": cmd_validate,
    "build": cmd_build,
    "stable-norm": cmd_stable_norm,
    "lemma-path": cmd_lemma_path,
    "export-field": cmd_export_field,
    "report": cmd_report,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except CertificationFailed as exc:
        print(f"certificate failed: {exc}", file=sys.stderr)
        return EXIT_CERT_FAILED
    except (ConfigError, HedlundError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
