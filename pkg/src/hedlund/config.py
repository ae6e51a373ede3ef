"""Run configuration: JSON with exact rationals as strings, canonical form and hashes."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError
from .polytope import format_rational
from .solver.grid import QUADRATURE

FORMAT_VERSION = 1


@dataclass(frozen=True)
class ToleranceConfig:
    low: float = 1e-3
    quad: float = 1e-2
    monotone: float = 2e-3
    trend_ratio: float = 0.6
    trend_slack: float = 2e-3
    calibration: float = 2e-2
    attain: float = 1e-6
    h1_on_curve: float = 1e-9
    length: float = 1e-4
    lemma: float = 1e-2


@dataclass(frozen=True)
class RunConfig:
    dimension: int
    vertices: tuple[tuple[Fraction, ...], ...]
    offsets: tuple[tuple[Fraction, ...], ...] | None = None
    placement: str = "deterministic"
    seed: int = 0
    sampling_res: int = 64
    inflation: float = 1.05
    res: int = 16
    stencil: int = 2
    n_max: int = 5
    w: tuple[tuple[int, ...], ...] = ()
    lemma_x: tuple[Fraction, ...] | None = None
    budget: int = 30_000_000
    workers: int = 1
    out: str = "hedlund-run"
    tolerances: ToleranceConfig = field(default_factory=ToleranceConfig)

    # serialization
    def to_json_obj(self) -> dict:
        def rat(v):
            return [format_rational(c) for c in v]

        obj = {
            "format": FORMAT_VERSION,
            "dimension": self.dimension,
            "vertices": [rat(v) for v in self.vertices],
            "offsets": None if self.offsets is None else [rat(v) for v in self.offsets],
            "placement": self.placement,
            "seed": self.seed,
            "sampling_res": self.sampling_res,
            "inflation": self.inflation,
            "res": self.res,
            "stencil": self.stencil,
            "n_max": self.n_max,
            "w": [list(v) for v in self.w],
            "lemma_x": None if self.lemma_x is None else rat(self.lemma_x),
            "budget": self.budget,
            "workers": self.workers,
            "out": self.out,
            "tolerances": dataclasses.asdict(self.tolerances),
        }
        return obj

    def canonical(self) -> str:
        return canonical_json(self.to_json_obj())

    def replace(self, **changes) -> "RunConfig":
        return validate(dataclasses.replace(self, **changes))

    @property
    def config_hash(self) -> str:
        """Hash of every field that can influence results (not ``out`` or ``workers``)."""
        obj = self.to_json_obj()
        obj.pop("out")
        obj.pop("workers")
        return _sha(obj)

    @property
    def metric_hash(self) -> str:
        """Hash of the fields that determine the calibrated metric."""
        obj = self.to_json_obj()
        keep = ("format", "dimension", "vertices", "offsets", "placement", "seed",
                "sampling_res", "inflation")
        return _sha({k: obj[k] for k in keep})

    @property
    def grid_hash(self) -> str:
        return _sha({"metric": self.metric_hash, "res": self.res, "stencil": self.stencil,
                     "quadrature": QUADRATURE})

    @property
    def start_point(self) -> tuple[Fraction, ...]:
        return self.lemma_x if self.lemma_x is not None else (Fraction(1, 2),) * self.dimension


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _sha(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


# parsing
def _rational(raw, where: str) -> Fraction:
    if isinstance(raw, bool) or not isinstance(raw, (str, int)):
        raise ConfigError(f"{where}: expected a rational string like '1/2', got {raw!r}")
    try:
        return Fraction(raw)
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: cannot parse {raw!r} as a rational") from exc


def _rat_vec(raw, where: str, m: int | None = None) -> tuple[Fraction, ...]:
    if not isinstance(raw, list):
        raise ConfigError(f"{where}: expected a list")
    if m is not None and len(raw) != m:
        raise ConfigError(f"{where}: expected {m} coordinates, got {len(raw)}")
    return tuple(_rational(c, f"{where}[{k}]") for k, c in enumerate(raw))


def _int(raw, where: str, lo: int | None = None) -> int:
    if isinstance(raw, bool) or not isinstance(raw, int):
        raise ConfigError(f"{where}: expected an integer, got {raw!r}")
    if lo is not None and raw < lo:
        raise ConfigError(f"{where}: must be >= {lo}, got {raw}")
    return raw


def parse_w(text: str, m: int | None = None) -> tuple[int, ...]:
    """Parse ``"1,1,0"`` (or ``"(1, 1, 0)"``) into an integer vector."""
    body = text.strip().strip("()[]")
    try:
        w = tuple(int(p) for p in body.split(","))
    except ValueError as exc:
        raise ConfigError(f"w: cannot parse {text!r}; expected comma-separated integers") from exc
    if m is not None and len(w) != m:
        raise ConfigError(f"w: expected {m} integers, got {len(w)}")
    return w


def from_json_obj(obj: dict) -> RunConfig:
    if not isinstance(obj, dict):
        raise ConfigError("config: top level must be an object")
    known = {f.name for f in dataclasses.fields(RunConfig)} | {"format"}
    unknown = sorted(set(obj) - known)
    if unknown:
        raise ConfigError(f"config: unknown field(s) {unknown}")
    if obj.get("format", FORMAT_VERSION) != FORMAT_VERSION:
        raise ConfigError(f"format: unsupported version {obj['format']!r}")
    for req in ("dimension", "vertices"):
        if req not in obj:
            raise ConfigError(f"{req}: missing required field")
    m = _int(obj["dimension"], "dimension", 1)
    if not isinstance(obj["vertices"], list) or not obj["vertices"]:
        raise ConfigError("vertices: expected a nonempty list")
    verts = tuple(_rat_vec(v, f"vertices[{k}]", m) for k, v in enumerate(obj["vertices"]))
    kw: dict = {"dimension": m, "vertices": verts}
    if obj.get("offsets") is not None:
        kw["offsets"] = tuple(_rat_vec(v, f"offsets[{k}]", m) for k, v in enumerate(obj["offsets"]))
    for name, lo in (("seed", 0), ("sampling_res", 1), ("res", 1), ("stencil", 1), ("n_max", 1),
                     ("budget", 1), ("workers", 1)):
        if name in obj:
            kw[name] = _int(obj[name], name, lo)
    if "placement" in obj:
        kw["placement"] = obj["placement"]
    if "inflation" in obj:
        val = obj["inflation"]
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ConfigError(f"inflation: expected a number, got {val!r}")
        kw["inflation"] = float(val)
    if "w" in obj:
        if not isinstance(obj["w"], list):
            raise ConfigError("w: expected a list of integer vectors")
        ws = []
        for k, v in enumerate(obj["w"]):
            if isinstance(v, str):
                ws.append(parse_w(v, m))
            elif isinstance(v, list) and len(v) == m:
                ws.append(tuple(_int(c, f"w[{k}][{j}]") for j, c in enumerate(v)))
            else:
                raise ConfigError(f"w[{k}]: expected {m} integers")
        kw["w"] = tuple(ws)
    if obj.get("lemma_x") is not None:
        kw["lemma_x"] = _rat_vec(obj["lemma_x"], "lemma_x", m)
    if "out" in obj:
        if not isinstance(obj["out"], str):
            raise ConfigError("out: expected a path string")
        kw["out"] = obj["out"]
    if "tolerances" in obj:
        tol = obj["tolerances"]
        names = {f.name for f in dataclasses.fields(ToleranceConfig)}
        if not isinstance(tol, dict) or set(tol) - names:
            raise ConfigError(f"tolerances: expected an object with keys among {sorted(names)}")
        for k, v in tol.items():
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0:
                raise ConfigError(f"tolerances.{k}: expected a nonnegative number")
        kw["tolerances"] = ToleranceConfig(**{k: float(v) for k, v in tol.items()})
    return validate(RunConfig(**kw))


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.placement not in ("deterministic", "seeded"):
        raise ConfigError(f"placement: expected 'deterministic' or 'seeded', got {cfg.placement!r}")
    if cfg.inflation < 1:
        raise ConfigError(f"inflation: must be >= 1, got {cfg.inflation}")
    if cfg.offsets is not None and len(cfg.offsets) == 0:
        raise ConfigError("offsets: expected one offset per curve")
    return cfg


def loads(text: str) -> RunConfig:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return from_json_obj(obj)


def load(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return loads(text)


def dumps(cfg: RunConfig) -> str:
    return json.dumps(cfg.to_json_obj(), indent=2, sort_keys=True) + "\n"
