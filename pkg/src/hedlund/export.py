"""Binary volume export: little-endian float64 payload plus a JSON sidecar."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .metric import grid_points
from .solver.grid import CoverBox
from .solver.paths import DistanceField

DTYPE = "<f8"


def write_volume(base: str | Path, values: np.ndarray, meta: dict) -> tuple[Path, Path]:
    """Write ``base.f64`` (row-major, last axis fastest) and ``base.json``.

    ``values`` has shape ``dims`` or ``dims + (components,)``.
    """
    base = Path(base)
    base.parent.mkdir(parents=True, exist_ok=True)
    arr = np.ascontiguousarray(values, dtype=DTYPE)
    payload = base.with_suffix(".f64")
    sidecar = base.with_suffix(".json")
    payload.write_bytes(arr.tobytes(order="C"))
    info = dict(meta)
    info.update({"dtype": DTYPE, "order": "C", "shape": list(arr.shape), "payload": payload.name,
                 "bytes": arr.nbytes})
    sidecar.write_text(json.dumps(info, indent=2, sort_keys=True) + "\n")
    return payload, sidecar


def read_volume(base: str | Path) -> tuple[np.ndarray, dict]:
    base = Path(base)
    info = json.loads(base.with_suffix(".json").read_text())
    raw = base.with_name(info["payload"]).read_bytes()
    arr = np.frombuffer(raw, dtype=info["dtype"]).reshape(info["shape"]).copy()
    return arr, info


def sample_field(H, name: str, res: int) -> tuple[np.ndarray, dict]:
    """Sample ``F``, ``phi`` (length factor) or ``eta<i>`` on the unit-cell grid."""
    m = H.dim
    pts = grid_points(res, m)
    hits = H.curves.locate(pts)
    dims = (res,) * m
    if name == "F":
        vals, comps = H.F(pts, hits).reshape(dims), 1
    elif name == "phi":
        vals, comps = H.length_factor(pts, hits).reshape(dims), 1
    elif name.startswith("eta"):
        try:
            i = int(name[3:].lstrip("_:"))
        except ValueError as exc:
            raise ValueError(f"field {name!r}: expected eta<facet index>") from exc
        if not 0 <= i < len(H.forms):
            raise ValueError(f"field {name!r}: facet index out of range 0..{len(H.forms) - 1}")
        vals, comps = H.eta(i, pts, hits).reshape(dims + (m,)), m
    else:
        raise ValueError(f"unknown field {name!r}; expected F, phi or eta<i>")
    meta = {"field": name, "dims": list(dims), "components": comps, "h": 1.0 / res,
            "box": {"lo": [0] * m, "hi": [1] * m}, "endpoint": False}
    return vals, meta


def save_distance_field(base: str | Path, fld: DistanceField, R: int, manifest_hash: str) -> tuple[Path, Path]:
    meta = {"field": "distance", "dims": list(fld.values.shape), "components": 1,
            "h": fld.box.h, "res": fld.box.res, "R": R,
            "box": {"lo": list(fld.box.lo), "hi": list(fld.box.hi)}, "endpoint": True,
            "sources": fld.sources.tolist(), "manifest_hash": manifest_hash}
    return write_volume(base, fld.values, meta)


def load_distance_field(base: str | Path, manifest_hash: str | None = None) -> DistanceField | None:
    """Load a saved field; None if missing or written for a different metric."""
    base = Path(base)
    if not base.with_suffix(".json").exists():
        return None
    values, info = read_volume(base)
    if manifest_hash is not None and info.get("manifest_hash") != manifest_hash:
        return None
    box = CoverBox(tuple(info["box"]["lo"]), tuple(info["box"]["hi"]), info["res"], info["R"])
    return DistanceField(box=box, values=values, sources=np.array(info["sources"], dtype=np.int64))
