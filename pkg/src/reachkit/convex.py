"""Piecewise-affine convex functions: subdifferentials, singular sets, envelopes, semiconcavity."""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .geometry import Polytope, SphereNet, clip_polygon, minimal_width, polytope_inscribed_ball


@dataclass(eq=False)
class PWLConvex:
    """f(x) = max_i <a_i, x> + b_i on an axis-aligned box."""

    slopes: np.ndarray
    offsets: np.ndarray
    lo: np.ndarray = None
    hi: np.ndarray = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.slopes, dtype=float))
        b = np.asarray(self.offsets, dtype=float).reshape(-1)
        if len(a) != len(b) or len(a) == 0:
            raise ValueError("need one offset per slope and at least one piece")
        keys = {}
        for i, row in enumerate(np.round(a, 12)):
            key = tuple(row)
            if key in keys:
                warnings.warn("duplicate slopes merged", stacklevel=2)
                j = keys[key]
                b[j] = max(b[j], b[i])
            else:
                keys[key] = i
        keep = sorted(keys.values())
        self.slopes, self.offsets = a[keep], b[keep]
        d = self.slopes.shape[1]
        self.lo = -np.ones(d) if self.lo is None else np.asarray(self.lo, dtype=float)
        self.hi = np.ones(d) if self.hi is None else np.asarray(self.hi, dtype=float)

    @property
    def dim(self):
        return self.slopes.shape[1]

    @property
    def lipschitz(self):
        return float(np.linalg.norm(self.slopes, axis=1).max())

    def __call__(self, x):
        return pwl_eval(self, x)

    def to_dict(self):
        return {"dim": self.dim,
                "pieces": [{"a": a.tolist(), "b": float(b)} for a, b in zip(self.slopes, self.offsets)],
                "domain": {"lo": self.lo.tolist(), "hi": self.hi.tolist()}}

    @classmethod
    def from_dict(cls, obj):
        pieces = obj["pieces"]
        dom = obj.get("domain", {})
        return cls([p["a"] for p in pieces], [p["b"] for p in pieces], dom.get("lo"), dom.get("hi"))


def linf_norm_2d():
    e = np.eye(2)
    return PWLConvex(np.vstack([e, -e]), np.zeros(4))


def pwl_eval(f: PWLConvex, x):
    x = np.asarray(x, dtype=float)
    vals = x @ f.slopes.T + f.offsets
    return vals.max(axis=-1)


def active_set(f: PWLConvex, x, tol=None) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    vals = f.slopes @ x + f.offsets
    m = vals.max()
    tol = 1e-9 * (1 + abs(m)) if tol is None else tol
    return np.flatnonzero(vals >= m - tol)


def subdifferential(f: PWLConvex, x, tol=None) -> Polytope:
    return Polytope(f.slopes[active_set(f, x, tol)])


def directional_derivative(f: PWLConvex, x, v, tol=None) -> float:
    """f'_+(x, v) = max over the subdifferential of <v, .>."""
    act = f.slopes[active_set(f, x, tol)]
    return float((act @ np.asarray(v, dtype=float)).max())


# ------------------------------------------------------------------ planar arrangement

@dataclass
class Cell:
    kind: str  # "vertex" or "edge"
    geometry: np.ndarray  # (1, 2) or (2, 2)
    active: tuple
    subdiff: Polytope
    radius: float

    def to_dict(self):
        return {"kind": self.kind, "geometry": self.geometry.tolist(), "active": list(self.active),
                "subdifferential": self.subdiff.vertices.tolist(), "radius": self.radius}


@dataclass
class SingularCellReport:
    k: int
    epsilon: float
    cells: list
    count: int

    def to_dict(self):
        return {"k": self.k, "epsilon": self.epsilon, "count": self.count,
                "cells": [c.to_dict() for c in self.cells]}


@dataclass
class Arrangement:
    regions: dict  # piece -> polygon
    edges: list  # (p, q, active)
    vertices: list  # (point, active)


def _box_polygon(lo, hi):
    return np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])


def _poly_area(p):
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def arrangement_2d(f: PWLConvex) -> Arrangement:
    if f.dim != 2:
        raise ValueError("exact arrangement only in the plane")
    box = _box_polygon(f.lo, f.hi)
    scale = float(np.abs(np.r_[f.lo, f.hi]).max())
    regions = {}
    for i in range(len(f.slopes)):
        poly = box
        for j in range(len(f.slopes)):
            if i != j:
                poly = clip_polygon(poly, f.slopes[j] - f.slopes[i], f.offsets[i] - f.offsets[j])
        if _poly_area(poly) > 1e-14 * scale ** 2:
            regions[i] = poly
    on_box = lambda p: bool(np.any(np.abs(p - f.lo) < 1e-9 * scale) or np.any(np.abs(p - f.hi) < 1e-9 * scale))
    edges, seen = [], set()
    vtx = {}
    for i, poly in regions.items():
        n = len(poly)
        for k in range(n):
            p, q = poly[k], poly[(k + 1) % n]
            key_p = tuple(np.round(p, 9) + 0.0)
            vtx.setdefault(key_p, p)
            if np.linalg.norm(q - p) < 1e-12 * max(scale, 1):
                continue
            mid = 0.5 * (p + q)
            # box edges lie on a coordinate line of the box
            if (abs(p[0] - q[0]) < 1e-12 and (abs(p[0] - f.lo[0]) < 1e-12 or abs(p[0] - f.hi[0]) < 1e-12)) or \
               (abs(p[1] - q[1]) < 1e-12 and (abs(p[1] - f.lo[1]) < 1e-12 or abs(p[1] - f.hi[1]) < 1e-12)):
                continue
            key = tuple(sorted([tuple(np.round(p, 9) + 0.0), tuple(np.round(q, 9) + 0.0)]))
            if key in seen:
                continue
            seen.add(key)
            act = tuple(active_set(f, mid).tolist())
            if len(act) >= 2:
                a, b = sorted([tuple(p), tuple(q)])
                edges.append((np.array(a), np.array(b), act))
    vertices = []
    for key in sorted(vtx):
        p = vtx[key]
        act = tuple(active_set(f, p).tolist())
        if len(act) >= 3 and not on_box(p):
            vertices.append((p, act))
    edges.sort(key=lambda e: (tuple(e[0]), tuple(e[1])))
    return Arrangement(regions, edges, vertices)


def sigma_k_eps(f: PWLConvex, k: int, eps: float) -> SingularCellReport:
    """Cells of the planar arrangement whose subdifferential holds a k-ball of radius eps."""
    if f.dim != 2:
        raise ValueError("sigma_k_eps needs d = 2")
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    arr = arrangement_2d(f)
    cells = []
    tol = 1e-12
    if k == 1:
        for p, q, act in arr.edges:
            sd = Polytope(f.slopes[list(act)])
            rad = polytope_inscribed_ball(sd, 1)[0]
            if rad >= eps - tol:
                cells.append(Cell("edge", np.vstack([p, q]), act, sd, rad))
    for p, act in arr.vertices:
        sd = Polytope(f.slopes[list(act)])
        rad = polytope_inscribed_ball(sd, k)[0] if sd.affine_dim() >= k else 0.0
        if rad < eps - tol:
            continue
        if k == 1 and any(_on_segment(p, c.geometry) for c in cells if c.kind == "edge"):
            continue
        cells.append(Cell("vertex", p[None, :], act, sd, rad))
    cells.sort(key=lambda c: (c.kind != "vertex", tuple(c.geometry.reshape(-1))))
    return SingularCellReport(k, eps, cells, len(cells))


def _on_segment(p, seg, tol=1e-9):
    a, b = seg
    ab = b - a
    t = np.clip((p - a) @ ab / (ab @ ab), 0, 1)
    return np.linalg.norm(a + t * ab - p) <= tol


def sigma_d_local_finiteness(f: PWLConvex, r: float) -> np.ndarray:
    """Arrangement vertices whose subdifferential holds a 2-ball of radius r."""
    rep = sigma_k_eps(f, 2, r)
    pts = [c.geometry[0] for c in rep.cells]
    return np.array(pts).reshape(-1, 2)


def in_sigma(f: PWLConvex, x, k: int, eps: float) -> bool:
    sd = subdifferential(f, x)
    if sd.affine_dim() < k:
        return False
    return polytope_inscribed_ball(sd, k)[0] >= eps - 1e-12


def z_k_eps_membership(f: PWLConvex, x, k: int, eps: float, dir_net: SphereNet | None = None) -> bool:
    """Is there a k-subspace K with f'(x,v) + f'(x,-v) > eps for all unit v in K?"""
    act = f.slopes[active_set(f, x)]
    if f.dim != 2 or k not in (1, 2):
        raise ValueError("z_k_eps_membership needs d = 2 and k in {1, 2}")
    if len(act) < 2:
        return False
    if k == 2:
        return minimal_width(act) > eps
    cands = [] if dir_net is None else list(dir_net.directions)
    for a, b in itertools.combinations(act, 2):
        dv = b - a
        if np.linalg.norm(dv) > 0:
            cands.append(dv / np.linalg.norm(dv))
    w = np.array(cands)
    width = (act @ w.T).max(axis=0) - (act @ w.T).min(axis=0)
    return bool(width.max() > eps)


@dataclass
class ZwitResult:
    passed: bool
    z_members: int
    failures: list


def zwit_inclusion_check(f: PWLConvex, k: int, eps: float, grid_n: int = 101,
                         dir_net: SphereNet | None = None) -> ZwitResult:
    """Every grid point in Z^k_eps must lie in Sigma^k_{eps/(k+1)}."""
    xs = np.linspace(f.lo[0], f.hi[0], grid_n)
    ys = np.linspace(f.lo[1], f.hi[1], grid_n)
    fails, nz = [], 0
    for x in xs:
        for y in ys:
            p = np.array([x, y])
            if len(active_set(f, p)) < 2:
                continue
            if z_k_eps_membership(f, p, k, eps, dir_net):
                nz += 1
                if not in_sigma(f, p, k, eps / (k + 1)):
                    fails.append(p.tolist())
    return ZwitResult(not fails, nz, fails)


@dataclass
class CoverNet:
    count: int
    pitch: float
    points: np.ndarray
    probe_max: float
    certified: bool


def dc_cover_net(k: int, L: float, eps: float, n_probe: int = 100_000, seed: int = 0) -> CoverNet:
    """Grid (eps/2)-net of the ball of radius 2L in R^k, certified by random probing."""
    if k < 1 or L <= 0 or eps <= 0:
        raise ValueError("need k >= 1, L > 0, eps > 0")
    pitch = eps / (2 * math.sqrt(k))
    m = math.ceil(4 * L / pitch - 1e-12) + 1
    ax = np.linspace(-2 * L, 2 * L, m)
    pts = np.stack(np.meshgrid(*([ax] * k), indexing="ij"), -1).reshape(-1, k)
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_probe, k))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    probes = dirs * (2 * L * rng.random(n_probe) ** (1 / k))[:, None]
    from scipy.spatial import cKDTree

    dmin, _ = cKDTree(pts).query(probes)
    pm = float(dmin.max())
    return CoverNet(len(pts), pitch, pts, pm, pm <= eps / 2 + 1e-12)


def dc_cover_count(k: int, L: float, eps: float) -> int:
    return dc_cover_net(k, L, eps).count


# ------------------------------------------------------------------ envelopes

class ConditionViolated(ValueError):
    def __init__(self, msg, witness):
        super().__init__(msg)
        self.witness = witness


@dataclass
class SupportEnvelope:
    """g(x) = max_m t_m + <e*_m, x - e_m>."""

    bases: np.ndarray
    values: np.ndarray
    functionals: np.ndarray

    @property
    def lipschitz(self):
        return float(np.linalg.norm(self.functionals, axis=1).max())

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        vals = self.values + np.einsum("xmd,md->xm", x[:, None, :] - self.bases[None], self.functionals)
        return vals.max(axis=1)


def convex_support_envelope(M, tol: float = 1e-12) -> SupportEnvelope:
    """Finite-max envelope of affine supports; requires t + e*(e~ - e) <= t~ for all pairs."""
    bases = np.array([np.atleast_1d(np.asarray(m[0], dtype=float)) for m in M])
    vals = np.array([float(m[1]) for m in M])
    fun = np.array([np.atleast_1d(np.asarray(m[2], dtype=float)) for m in M])
    # lhs[m, n] = t_m + e*_m(e_n - e_m) must be <= t_n
    lhs = vals[:, None] + np.einsum("mnd,md->mn", bases[None, :, :] - bases[:, None, :], fun)
    excess = lhs - vals[None, :]
    if excess.max() > tol * (1 + np.abs(vals).max()):
        m, n = np.unravel_index(int(np.argmax(excess)), excess.shape)
        raise ConditionViolated("support condition violated", (int(m), int(n), float(excess[m, n])))
    return SupportEnvelope(bases, vals, fun)


# ------------------------------------------------------------------ semiconcavity

@dataclass
class SemiconcavityCertificate:
    constant: float
    passed: bool
    worst: float
    witness: list | None = None
    n_triples: int = 0


def _triple_defect(x0, x1, x2, g0, g1, g2):
    """g(x1) minus the chord value; negative means a convexity defect."""
    l0 = np.linalg.norm(x1 - x0, axis=-1)
    l2 = np.linalg.norm(x2 - x1, axis=-1)
    return g1 - (l2 * g0 + l0 * g2) / (l0 + l2)


def semiconcave_check(points, values, c: float, tol: float | None = None) -> SemiconcavityCertificate:
    """Concavity of u - (c/2)|x|^2 on consecutive collinear triples of a 1-D sample or a product grid."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    u = np.asarray(values, dtype=float).reshape(-1)
    g = u - 0.5 * c * np.einsum("ij,ij->i", pts, pts)
    tol = 1e-12 * (1 + float(np.abs(u).max())) if tol is None else tol
    d = pts.shape[1]
    if d == 1:
        order = np.argsort(pts[:, 0], kind="stable")
        x, gg = pts[order], g[order]
        defect = _triple_defect(x[:-2], x[1:-1], x[2:], gg[:-2], gg[1:-1], gg[2:])
        if len(defect) == 0:
            return SemiconcavityCertificate(c, True, 0.0, None, 0)
        k = int(np.argmin(defect))
        worst = float(-defect[k])
        wit = [x[k, 0], x[k + 1, 0], x[k + 2, 0]] if worst > tol else None
        return SemiconcavityCertificate(c, worst <= tol, worst, wit, len(defect))
    axes = [np.unique(pts[:, j]) for j in range(d)]
    shape = tuple(len(a) for a in axes)
    if np.prod(shape) != len(pts):
        raise ValueError("samples must form a full product grid")
    index = tuple(np.searchsorted(axes[j], pts[:, j]) for j in range(d))
    G = np.empty(shape)
    G[index] = g
    X = np.stack(np.meshgrid(*axes, indexing="ij"), -1)
    steps = [np.eye(d, dtype=int)[j] for j in range(d)]
    uniform = all(np.allclose(np.diff(a), np.diff(a)[0]) for a in axes if len(a) > 1)
    if uniform and d == 2:
        steps += [np.array([1, 1]), np.array([1, -1])]
    worst, wit, count = -math.inf, None, 0
    for s in steps:
        lo = [slice(max(0, -2 * si), n - max(0, 2 * si)) for si, n in zip(s, shape)]
        mid = [slice(sl.start + si, sl.stop + si) for sl, si in zip(lo, s)]
        hi = [slice(sl.start + 2 * si, sl.stop + 2 * si) for sl, si in zip(lo, s)]
        lo, mid, hi = tuple(lo), tuple(mid), tuple(hi)
        defect = _triple_defect(X[lo], X[mid], X[hi], G[lo], G[mid], G[hi])
        if defect.size == 0:
            continue
        count += defect.size
        k = int(np.argmin(defect))
        if -defect.reshape(-1)[k] > worst:
            worst = float(-defect.reshape(-1)[k])
            wit = X[mid].reshape(-1, d)[k].tolist()
    worst = max(worst, 0.0) if count == 0 else worst
    return SemiconcavityCertificate(c, worst <= tol, worst, wit if worst > tol else None, count)


def minimal_semiconcavity_constant(points, values, hi: float = 1e3, iters: int = 60,
                                   tol: float | None = None) -> float:
    """Smallest c in [0, hi] (to bisection accuracy) passing semiconcave_check; inf if none."""
    if not semiconcave_check(points, values, hi, tol).passed:
        return math.inf
    if semiconcave_check(points, values, 0.0, tol).passed:
        return 0.0
    lo = 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if semiconcave_check(points, values, mid, tol).passed:
            hi = mid
        else:
            lo = mid
    return hi


@dataclass
class SemiconcaveExtension:
    points: np.ndarray
    psi: np.ndarray
    slopes: np.ndarray
    c: float

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        diff = x[:, None, :] - self.points[None]
        vals = self.psi + np.einsum("xpd,pd->xp", diff, self.slopes) + self.c * (diff ** 2).sum(-1)
        return vals.min(axis=1)


def semiconcave_extend(P, psi, h, c: float, K: float, tol: float = 1e-9) -> SemiconcaveExtension:
    """F(x) = min_p psi(p) + h_p(x - p) + c|x - p|^2, after checking the subgradient inequality."""
    P = np.asarray(P, dtype=float)
    if P.ndim == 1:
        P = P[:, None]
    psi = np.asarray(psi, dtype=float).reshape(-1)
    h = np.asarray(h, dtype=float).reshape(len(P), -1)
    if np.linalg.norm(h, axis=1).max() > K + tol:
        raise ConditionViolated("slope exceeds K", int(np.argmax(np.linalg.norm(h, axis=1))))
    delta = P[None, :, :] - P[:, None, :]  # row p, column q: q - p
    resid = psi[None, :] - psi[:, None] - np.einsum("pqd,pd->pq", delta, h) - c * (delta ** 2).sum(-1)
    if resid.max() > tol:
        p, q = np.unravel_index(int(np.argmax(resid)), resid.shape)
        raise ConditionViolated("subgradient inequality violated", (int(p), int(q), float(resid[p, q])))
    F = SemiconcaveExtension(P, psi, h, c)
    err = np.abs(F(P) - psi).max()
    if err > tol:
        raise AssertionError(f"extension does not restrict to psi (error {err:.3g})")
    return F
