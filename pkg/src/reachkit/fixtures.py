"""Deterministic example sets: lens chains A_K, rotated chains in R^3, the smycka curve, controls."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline

from .curves import ArcCurve, as_sampled_set
from .geometry import PolyhedralCone, cone_hull
from .planar import band_region_sample
from .sets import SampledSet

AK_SEMICONCAVITY = 2.0


@dataclass
class FixtureSpec:
    name: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def parse(cls, text: str) -> "FixtureSpec":
        """'name:k=v,k=v' with values read as floats, ints or ';'-separated lists."""
        name, _, rest = text.partition(":")
        params = {}
        for item in filter(None, rest.split(",")):
            k, _, v = item.partition("=")
            params[k.strip()] = _parse_value(v.strip())
        seed = int(params.pop("seed", 0))
        return cls(name.strip(), params, seed)

    def to_dict(self):
        return {"name": self.name, "params": self.params, "seed": self.seed}


def _parse_value(v):
    if ";" in v:
        return [_parse_value(x) for x in v.split(";") if x]
    for cast in (int, float):
        try:
            return cast(v)
        except ValueError:
            pass
    if v.lower() in ("pi", "π"):
        return math.pi
    if v.lower() in ("true", "false"):
        return v.lower() == "true"
    return v


# ------------------------------------------------------------------ A_K


def ak_phi(K):
    """x -> dist(x, K)^2."""
    K = np.sort(np.asarray(K, dtype=float))

    def phi(x):
        x = np.asarray(x, dtype=float)
        return np.min((x[..., None] - K) ** 2, axis=-1)

    return phi


def _check_K(K):
    K = np.unique(np.asarray(K, dtype=float))
    if len(K) < 2:
        raise ValueError("K needs at least two points")
    return K


def _ak_gap_samples(K, n):
    """Per-gap band samples in R^2, shared K points kept once with a line cone."""
    pitch = (K[-1] - K[0]) / n
    out = []
    for i, (a, b) in enumerate(zip(K[:-1], K[1:])):
        mid = 0.5 * (a + b)

        def top(x, a=a, b=b):
            x = np.asarray(x, dtype=float)
            return np.minimum((x - a) ** 2, (x - b) ** 2)

        def bottom(x, top=top):
            return -top(x)

        S = band_region_sample(top, bottom, a, b, pitch, 5 * pitch, extra_s=[mid],
                               refine=[a, mid, b], label=f"gap{i}")
        pts, cones = S.points, list(S.tangent_cones)
        keep = np.ones(len(pts), bool)
        if i > 0:
            keep &= np.linalg.norm(pts - [a, 0.0], axis=1) > 1e-12
        if i < len(K) - 2:
            j = int(np.argmin(np.linalg.norm(pts - [b, 0.0], axis=1)))
            cones[j] = PolyhedralCone.line([1.0, 0.0])
        out.append((pts[keep], [c for c, k in zip(cones, keep) if k]))
    return out


def gen_ak(K, n: int = 2000) -> SampledSet:
    """Lens chain between the graphs of +-dist(x, K)^2 over conv K; n boundary abscissae."""
    K = _check_K(K)
    parts = _ak_gap_samples(K, n)
    pts = np.vstack([p for p, _ in parts])
    cones = [c for _, cs in parts for c in cs]
    meta = {"fixture": "ak", "K": K.tolist(), "n": int(n),
            "semiconcavity_constant": AK_SEMICONCAVITY}
    return SampledSet(2, pts, cones, "A_K", meta)


def _embed(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[1.0, 0.0], [0.0, c], [0.0, s]])


def gen_ak_theta(K, theta, n: int = 2000) -> SampledSet:
    """Gap i of A_K rotated by theta_i about the x-axis in R^3."""
    K = _check_K(K)
    theta = np.asarray(theta, dtype=float).reshape(-1)
    if len(theta) != len(K) - 1:
        raise ValueError(f"need {len(K) - 1} angles, got {len(theta)}")
    parts = _ak_gap_samples(K, n)
    pts, cones = [], []
    for (p, cs), th in zip(parts, theta):
        E = _embed(th)
        pts.append(p @ E.T)
        cache = {}
        for c in cs:
            if id(c) not in cache:
                cache[id(c)] = PolyhedralCone(3, c.generators @ E.T)
            cones.append(cache[id(c)])
    meta = {"fixture": "ak_theta", "K": K.tolist(), "theta": theta.tolist(), "n": int(n),
            "semiconcavity_constant": AK_SEMICONCAVITY}
    return SampledSet(3, np.vstack(pts), cones, "A_K^theta", meta)


# ------------------------------------------------------------------ smycka


def smycka_psi(t):
    t = np.asarray(t, dtype=float)
    return np.stack([t ** 2, t * np.exp(-t ** 2)], axis=-1)


def smycka_dpsi(t):
    t = np.asarray(t, dtype=float)
    return np.stack([2 * t, (1 - 2 * t ** 2) * np.exp(-t ** 2)], axis=-1)


def smycka_ddpsi(t):
    t = np.asarray(t, dtype=float)
    return np.stack([np.full_like(t, 2.0), (4 * t ** 3 - 6 * t) * np.exp(-t ** 2)], axis=-1)


def gen_smycka(t_range=(-3.0, 3.0), n: int = 4001):
    """Arc-length sample of psi(t) = (t^2, t exp(-t^2)); returns (ArcCurve, SampledSet)."""
    t0, t1 = map(float, t_range)
    if abs(t0 + t1) > 1e-12 or t1 <= 0:
        raise ValueError("range must be symmetric about 0")
    # arc length from 0, Simpson on a grid 10x denser than the knots
    m = 10 * (n // 2 + 1) + 1
    tf = np.linspace(0.0, t1, m)
    speed = np.linalg.norm(smycka_dpsi(tf), axis=1)
    sf = cumulative_simpson(speed, x=tf, initial=0.0)
    half = sf[-1]
    inv = CubicSpline(sf, tf)
    knots = np.linspace(-half, half, n)
    tk = np.sign(knots) * inv(np.abs(knots))
    # Newton polish of s(t) = knot against the spline arc length
    fwd = CubicSpline(tf, sf)
    for _ in range(3):
        a = np.abs(tk)
        a = a - (fwd(a) - np.abs(knots)) / np.linalg.norm(smycka_dpsi(a), axis=1)
        tk = np.sign(knots) * np.clip(a, 0, t1)
    pts = smycka_psi(tk)
    dp = smycka_dpsi(tk)
    tan = dp / np.linalg.norm(dp, axis=1)[:, None]
    grid = np.linspace(t0, t1, 20 * n + 1)
    lam = float(np.linalg.norm(smycka_dpsi(grid), axis=1).min())
    M = float(np.linalg.norm(smycka_ddpsi(grid), axis=1).max())
    meta = {"fixture": "smycka", "t_range": [t0, t1], "n": int(n), "lambda": lam, "M": M,
            "derivative_lipschitz_bound": 2 * M / lam ** 2, "formula": "2M/lambda^2"}
    curve = ArcCurve(2, knots, pts, closed=False, open_ends=(True, True), tangents=tan,
                     label="smycka", meta=meta)
    return curve, as_sampled_set(curve)


# ------------------------------------------------------------------ controls


def _circle_curve(r=1.0, n=2000, center=(0.0, 0.0)):
    t = np.linspace(0, 2 * np.pi, int(n) + 1)
    pts = np.asarray(center, float) + r * np.c_[np.cos(t), np.sin(t)]
    tan = np.c_[-np.sin(t), np.cos(t)]
    return ArcCurve(2, r * t, pts, closed=True, tangents=tan, label="circle",
                    meta={"fixture": "circle", "r": r, "reach": r})


def _arc_curve(r=1.0, angle=math.pi / 2, n=500):
    t = np.linspace(0, angle, int(n))
    pts = r * np.c_[np.cos(t), np.sin(t)]
    tan = np.c_[-np.sin(t), np.cos(t)]
    return ArcCurve(2, r * t, pts, tangents=tan, label="arc", meta={"fixture": "arc", "r": r})


def _segment_curve(length=1.0, n=201, dim=2):
    s = np.linspace(0, length, int(n))
    pts = np.zeros((len(s), int(dim)))
    pts[:, 0] = s
    tan = np.zeros_like(pts)
    tan[:, 0] = 1
    return ArcCurve(int(dim), s, pts, tangents=tan, label="segment",
                    meta={"fixture": "segment", "reach": "inf"})


def _parabola_curve(a=1.0, x_max=2.0, n=2001):
    xf = np.linspace(0, x_max, 20 * n + 1)
    speed = np.sqrt(1 + (2 * a * xf) ** 2)
    sf = cumulative_simpson(speed, x=xf, initial=0.0)
    knots = np.linspace(-sf[-1], sf[-1], int(n))
    x = np.sign(knots) * CubicSpline(sf, xf)(np.abs(knots))
    pts = np.c_[x, a * x ** 2]
    tan = np.c_[np.ones_like(x), 2 * a * x]
    tan /= np.linalg.norm(tan, axis=1)[:, None]
    return ArcCurve(2, knots, pts, open_ends=(True, True), tangents=tan, label="parabola",
                    meta={"fixture": "parabola", "a": a, "reach": 1 / (2 * a)})


def _sphere(r=1.0, n=2000):
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    phi = i * math.pi * (3 - math.sqrt(5))
    rr = np.sqrt(1 - z ** 2)
    u = np.c_[rr * np.cos(phi), rr * np.sin(phi), z]
    cones = []
    for v in u:
        a = np.cross(v, [1.0, 0, 0] if abs(v[0]) < 0.9 else [0, 1.0, 0])
        a /= np.linalg.norm(a)
        b = np.cross(v, a)
        cones.append(PolyhedralCone(3, np.vstack([a, -a, b, -b])))
    return SampledSet(3, r * u, cones, "sphere", {"fixture": "sphere", "r": r, "reach": r})


def _ccw(V):
    x, y = V[:, 0], V[:, 1]
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    return V if area > 0 else V[::-1]


def _polygon_boundary(vertices, n_per_side=100, label="polygon"):
    """Boundary sample of a convex polygon carrying the tangent cones of the solid polygon."""
    V = _ccw(np.asarray(vertices, dtype=float))
    m = len(V)
    pts, cones = [], []
    for k in range(m):
        a, b = V[k], V[(k + 1) % m]
        e = (b - a) / np.linalg.norm(b - a)
        prev = V[k - 1]
        cones.append(cone_hull(np.vstack([e, (prev - a) / np.linalg.norm(prev - a)]), 2))
        pts.append(a)
        half = PolyhedralCone.halfspace([e[1], -e[0]])
        for s in np.linspace(0, 1, int(n_per_side) + 1)[1:-1]:
            pts.append(a + s * (b - a))
            cones.append(half)
    return SampledSet(2, np.array(pts), cones, label,
                      {"fixture": label, "vertices": V.tolist(), "reach": "inf"})


def _regular_polygon(m=6, r=1.0):
    t = 2 * np.pi * np.arange(int(m)) / int(m)
    return r * np.c_[np.cos(t), np.sin(t)]


def _filled_polygon(vertices, pitch=0.02, label="filled_polygon"):
    V = _ccw(np.asarray(vertices, dtype=float))
    per = max(2, int(round(np.linalg.norm(V[1] - V[0]) / pitch)))
    B = _polygon_boundary(V, per, label)
    lo, hi = V.min(axis=0), V.max(axis=0)
    g = np.stack(np.meshgrid(np.arange(lo[0] + pitch / 2, hi[0], pitch),
                             np.arange(lo[1] + pitch / 2, hi[1], pitch)), -1).reshape(-1, 2)
    inside = np.ones(len(g), bool)
    for k in range(len(V)):
        a, b = V[k], V[(k + 1) % len(V)]
        cross = (b[0] - a[0]) * (g[:, 1] - a[1]) - (b[1] - a[1]) * (g[:, 0] - a[0])
        inside &= cross > 0.25 * pitch * np.linalg.norm(b - a)
    full = PolyhedralCone.full(2)
    pts = np.vstack([B.points, g[inside]])
    return SampledSet(2, pts, B.tangent_cones + [full] * int(inside.sum()), label,
                      {"fixture": label, "vertices": V.tolist(), "reach": "inf"})


def _filled_disk(r=1.0, pitch=0.02):
    n = max(8, int(round(2 * np.pi * r / pitch)))
    t = 2 * np.pi * np.arange(n) / n
    u = np.c_[np.cos(t), np.sin(t)]
    cones = [PolyhedralCone.halfspace(v) for v in u]
    g = np.stack(np.meshgrid(np.arange(-r, r + pitch / 2, pitch),
                             np.arange(-r, r + pitch / 2, pitch)), -1).reshape(-1, 2)
    g = g[np.linalg.norm(g, axis=1) < r - 0.25 * pitch]
    full = PolyhedralCone.full(2)
    return SampledSet(2, np.vstack([r * u, g]), cones + [full] * len(g), "filled_disk",
                      {"fixture": "filled_disk", "r": r, "reach": "inf"})


def _two_points(gap=1.0, dim=2):
    P = np.zeros((2, int(dim)))
    P[1, 0] = gap
    triv = PolyhedralCone.trivial(int(dim))
    return SampledSet(int(dim), P, [triv, triv], "two_points",
                      {"fixture": "two_points", "reach": gap / 2})


CURVE_CONTROLS = {"circle": _circle_curve, "arc": _arc_curve, "segment": _segment_curve,
                  "parabola": _parabola_curve}


def gen_controls(name: str, params: dict | None = None, curve: bool = False):
    """Standard shapes with exact tangent oracles; curve=True returns an ArcCurve where meaningful."""
    p = dict(params or {})
    if name in CURVE_CONTROLS:
        c = CURVE_CONTROLS[name](**p)
        return c if curve else as_sampled_set(c)
    if curve:
        raise ValueError(f"{name} is not a curve control")
    if name == "sphere":
        return _sphere(**p)
    if name == "two_points":
        return _two_points(**p)
    if name == "square_boundary":
        side = float(p.get("side", 2.0))
        h = side / 2
        V = [[-h, -h], [h, -h], [h, h], [-h, h]]
        return _polygon_boundary(V, p.get("n", 100), "square_boundary")
    if name == "convex_polygon":
        V = p.get("vertices")
        V = _regular_polygon(p.get("m", 6), p.get("r", 1.0)) if V is None else V
        return _polygon_boundary(V, p.get("n", 100), "convex_polygon")
    if name == "filled_polygon":
        V = p.get("vertices")
        V = _regular_polygon(p.get("m", 6), p.get("r", 1.0)) if V is None else V
        return _filled_polygon(V, p.get("pitch", 0.02))
    if name == "filled_disk":
        return _filled_disk(**p)
    raise ValueError(f"unknown control {name!r}")


CONTROL_NAMES = sorted(list(CURVE_CONTROLS) + ["sphere", "two_points", "square_boundary",
                                               "convex_polygon", "filled_polygon", "filled_disk"])


def make_fixture(spec: FixtureSpec | str):
    """Build a fixture from a spec; curves come back as ArcCurve."""
    if isinstance(spec, str):
        spec = FixtureSpec.parse(spec)
    p = dict(spec.params)
    if spec.name == "ak":
        return gen_ak(_as_list(p.get("K", [0, 1])), int(p.get("n", 2000)))
    if spec.name == "ak_theta":
        return gen_ak_theta(_as_list(p.get("K", [0, 0.5, 1])),
                            _as_list(p.get("theta", [0, math.pi / 2])), int(p.get("n", 2000)))
    if spec.name == "smycka":
        T = float(p.get("range", p.get("T", 3.0)))
        return gen_smycka((-T, T), int(p.get("n", 4001)))[0]
    curve = bool(p.pop("curve", False))
    return gen_controls(spec.name, p, curve=curve)


def _as_list(v):
    return [float(x) for x in v] if isinstance(v, (list, tuple)) else [float(v)]
