"""JSON and CSV serialization; infinities are written as the strings "inf" / "-inf"."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .convex import PWLConvex
from .curves import ArcCurve
from .geometry import PolyhedralCone
from .sets import SampledSet


def to_jsonable(obj):
    """Recursively convert numpy types and non-finite floats."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


def from_jsonable_float(x):
    if isinstance(x, str):
        return float(x)
    return x


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, allow_nan=False)


def write_json(obj, path):
    text = dumps(obj) + "\n"
    if path is None or str(path) == "-":
        print(text, end="")
    else:
        Path(path).write_text(text)


def sampled_set_to_dict(S: SampledSet) -> dict:
    out = {"dim": S.dim, "points": S.points.tolist(), "label": S.label}
    if S.has_cones:
        out["tangent_cones"] = [{"index": i, "generators": c.generators.tolist(),
                                 "full_space": bool(c.full_space)}
                                for i, c in enumerate(S.tangent_cones)]
    if S.meta:
        out["meta"] = S.meta
    return out


def sampled_set_from_dict(obj: dict) -> SampledSet:
    d = int(obj["dim"])
    pts = np.asarray(obj["points"], dtype=float).reshape(-1, d)
    cones = None
    if obj.get("tangent_cones") is not None:
        cones = [None] * len(pts)
        for c in obj["tangent_cones"]:
            g = np.asarray(c["generators"], dtype=float).reshape(-1, d)
            cones[int(c["index"])] = PolyhedralCone(d, g, bool(c.get("full_space", False)))
        if any(c is None for c in cones):
            raise ValueError("tangent_cones must cover every point")
    return SampledSet(d, pts, cones, obj.get("label", ""), dict(obj.get("meta", {})))


def arc_curve_from_dict(obj: dict) -> ArcCurve:
    return ArcCurve(int(obj["dim"]), obj["knots"], obj["points"], bool(obj.get("closed", False)),
                    tuple(obj.get("open_ends", (False, False))))


def load(path):
    """Read a SampledSet, ArcCurve or PWLConvex JSON file (detected by its keys)."""
    obj = json.loads(Path(path).read_text())
    if "pieces" in obj:
        return PWLConvex.from_dict(obj)
    if "knots" in obj:
        return arc_curve_from_dict(obj)
    if "points" in obj:
        return sampled_set_from_dict(obj)
    raise ValueError(f"{path}: unrecognized JSON object")


def dump_object(obj) -> dict:
    if isinstance(obj, SampledSet):
        return sampled_set_to_dict(obj)
    return obj.to_dict()


def write_csv(rows: list, path):
    """Flatten a list of dicts (a per-point table) to CSV."""
    if not rows:
        Path(path).write_text("")
        return
    keys = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for r in rows:
            w.writerow({k: to_jsonable(r.get(k)) for k in keys})
