"""Reach estimation, normal probing and distance-function certificates on sampled sets."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import (
    PolyhedralCone,
    Polytope,
    SphereNet,
    build_sphere_net,
    cone_hull,
    polar_cone,
    polytope_inscribed_ball,
)
from .sets import SampledSet

LINE_TOL_DEG = 2.0
CLUSTER_TOL_DEG = 5.0


def _threads(threads=None):
    if threads is None:
        threads = int(os.environ.get("REACHKIT_THREADS", "1") or 1)
    return max(1, int(threads))


def _pmap(fn, items, threads=None):
    threads = _threads(threads)
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(threads) as ex:
        return list(ex.map(fn, items))


def default_tol(S: SampledSet) -> float:
    return 1e-9 * max(S.diameter, 1e-300)


# ------------------------------------------------------------------ projection

def metric_projection(z, S: SampledSet, tol: float = 1e-9) -> np.ndarray:
    """Indices of sample points within ``tol`` of the minimal distance to ``z``."""
    z = np.asarray(z, dtype=float)
    d = np.linalg.norm(S.points - z, axis=1)
    return np.flatnonzero(d <= d.min() + tol)


# ------------------------------------------------------------------ Federer estimator

@dataclass
class ReachReport:
    estimate: float
    witness_pair: tuple | None
    per_point: np.ndarray
    tol: float

    def to_dict(self):
        return {
            "estimate": self.estimate,
            "witness_pair": None if self.witness_pair is None else list(self.witness_pair),
            "tol": self.tol,
            "per_point": self.per_point.tolist(),
        }


def _pair_ratios(S, i, cols, tol):
    """|b-a|^2 / (2 dist(b-a, Tan(A,a))) for b in cols; inf where unconstrained."""
    cone = S.tangent_cones[i]
    u = S.points[cols] - S.points[i]
    sq = np.einsum("ij,ij->i", u, u)
    out = np.full(len(cols), np.inf)
    if cone.full_space:
        return out, sq, np.zeros(len(cols))
    dist = cone.distance(u)
    mask = (dist > tol) & (sq > 0)
    out[mask] = sq[mask] / (2.0 * dist[mask])
    return out, sq, dist


def federer_reach_estimate(S: SampledSet, tol: float | None = None, threads=None) -> ReachReport:
    """inf over ordered pairs of |b-a|^2 / (2 dist(b-a, Tan(A,a)))."""
    S.require_cones()
    tol = default_tol(S) if tol is None else tol
    n = S.n
    allc = np.arange(n)
    full = np.array([c.full_space for c in S.tangent_cones], dtype=bool)
    edge, inner = np.flatnonzero(~full), np.flatnonzero(full)

    def row(i):
        cone = S.tangent_cones[i]
        if cone.full_space:
            return math.inf, 0
        nrm = None if len(inner) == 0 else cone._halfspace_normal()
        if nrm is None:
            r, _, _ = _pair_ratios(S, i, allc, tol)
            r[i] = np.inf
            j = int(np.argmin(r))
            return float(r[j]), j
        # half-space rows: a ratio below m forces b into the ball B(a + m n, m)
        r, _, _ = _pair_ratios(S, i, edge, tol)
        r[edge == i] = np.inf
        m = float(r.min()) if len(r) else math.inf
        if math.isfinite(m):
            near = S.tree.query_ball_point(S.points[i] + m * nrm, m * (1 + 1e-9) + 1e-300)
            extra = np.asarray(near, dtype=int)
            extra = extra[full[extra]]
        else:
            extra = inner
        cols = np.sort(np.concatenate([edge, extra]))
        r, _, _ = _pair_ratios(S, i, cols, tol)
        r[cols == i] = np.inf
        k = int(np.argmin(r))
        return float(r[k]), int(cols[k])

    res = _pmap(row, range(n), threads)
    per = np.array([v for v, _ in res])
    i = int(np.argmin(per)) if n else 0
    est = float(per[i]) if n else math.inf
    witness = (i, res[i][1]) if math.isfinite(est) else None
    return ReachReport(est, witness, per, tol)


@dataclass(frozen=True)
class Violation:
    i: int
    j: int
    magnitude: float


def federer_violations(S: SampledSet, t: float, tol: float | None = None, rows=None,
                       cols=None, limit: int | None = None, threads=None) -> list[Violation]:
    """Ordered pairs (a, b) with dist(b-a, Tan(A,a)) > |b-a|^2 / (2t), worst first."""
    S.require_cones()
    tol = default_tol(S) if tol is None else tol
    rows = range(S.n) if rows is None else [int(r) for r in rows]
    # full-cone rows never violate
    rows = [i for i in rows if not S.tangent_cones[i].full_space]
    cols = np.arange(S.n) if cols is None else np.asarray(cols, dtype=int)

    def row(i):
        r, sq, dist = _pair_ratios(S, i, cols, tol)
        bad = np.flatnonzero((r < t) & (cols != i))
        return [(float(dist[k] - sq[k] / (2 * t)), i, int(cols[k])) for k in bad]

    out = [v for part in _pmap(row, rows, threads) for v in part]
    out.sort(key=lambda v: (-v[0], v[1], v[2]))
    if limit is not None:
        out = out[:limit]
    return [Violation(i, j, m) for m, i, j in out]


def reach_bisection(S: SampledSet, lo=0.0, hi=None, iters=40, tol=None):
    """Largest t (to bisection accuracy) with no violations; cross-checks the estimator."""
    hi = S.diameter if hi is None else hi
    if not federer_violations(S, hi, tol, limit=1):
        return hi
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if federer_violations(S, mid, tol, limit=1):
            hi = mid
        else:
            lo = mid
    return lo


# ------------------------------------------------------------------ tangent estimation

@dataclass
class TangentEstimate:
    cone: PolyhedralCone
    kind: str  # trivial, ray, line, sector, halfplane, full, generic, inconclusive
    aperture_deg: float = math.nan
    directions: np.ndarray = None
    note: str = ""


def _cluster(dirs, tol_rad):
    """Greedy angular clustering; returns (unit means, labels)."""
    cos_tol = math.cos(tol_rad)
    sums, labels = [], np.empty(len(dirs), dtype=int)
    for k, v in enumerate(dirs):
        for c, s in enumerate(sums):
            if v @ s >= cos_tol * np.linalg.norm(s):
                sums[c] = s + v
                labels[k] = c
                break
        else:
            sums.append(v.copy())
            labels[k] = len(sums) - 1
    means = np.array([s / np.linalg.norm(s) for s in sums]).reshape(-1, dirs.shape[1])
    return means, labels


def _secants(S, i, s, s_max):
    """Unit secants from sample i within scale s, floored at 1.5 x the sample pitch."""
    p = S.points[i]
    if S.n == 1 or S.nn_dist[i] > s_max:
        return np.zeros((0, S.dim))
    s_eff = max(s, 1.5 * S.spacing)
    idx = [j for j in S.tree.query_ball_point(p, s_eff) if j != i]
    if not idx:
        return np.zeros((0, S.dim))
    u = S.points[idx] - p
    return u / np.linalg.norm(u, axis=1)[:, None]


def _secant_lengths(S, i, s):
    """Distances matching the unit secants returned by _secants."""
    p = S.points[i]
    s_eff = max(s, 1.5 * S.spacing)
    idx = [j for j in S.tree.query_ball_point(p, s_eff) if j != i]
    return np.linalg.norm(S.points[idx] - p, axis=1)


def _curvature_corrected(dirs, dist):
    """Remove the first-order drift of secant angle with distance on each side of the axis."""
    ang = np.arctan2(dirs[:, 1], dirs[:, 0])
    axis = 0.5 * math.atan2(np.sin(2 * ang).sum(), np.cos(2 * ang).sum())
    a = np.array([math.cos(axis), math.sin(axis)])
    out = dirs.copy()
    for sign in (1.0, -1.0):
        m = sign * (dirs @ a) > 0
        if m.sum() < 3:
            continue
        base = axis if sign > 0 else axis + math.pi
        dev = (ang[m] - base + math.pi) % (2 * math.pi) - math.pi
        A = np.c_[np.ones(m.sum()), dist[m]]
        c0, c1 = np.linalg.lstsq(A, dev, rcond=None)[0]
        fixed = base + dev - c1 * dist[m]
        out[m] = np.c_[np.cos(fixed), np.sin(fixed)]
    return out


def planar_cone_kind(dirs, line_tol_deg=LINE_TOL_DEG, ang_tol_deg=CLUSTER_TOL_DEG):
    """Classify a finite set of planar unit directions into a closed convex cone."""
    if len(dirs) == 0:
        return TangentEstimate(PolyhedralCone.trivial(2), "trivial", 0.0, dirs)
    ang = np.sort(np.mod(np.arctan2(dirs[:, 1], dirs[:, 0]), 2 * math.pi))
    gaps = np.diff(np.r_[ang, ang[0] + 2 * math.pi])
    k = int(np.argmax(gaps))
    gmax = float(gaps[k])
    aperture = math.degrees(2 * math.pi - gmax)
    ang_tol = math.radians(ang_tol_deg)
    if gmax < math.pi - ang_tol:
        return TangentEstimate(PolyhedralCone.full(2), "full", 360.0, dirs)
    start = ang[(k + 1) % len(ang)]
    end = ang[k]
    g1 = np.array([math.cos(start), math.sin(start)])
    g2 = np.array([math.cos(end), math.sin(end)])
    # axis fit by doubled-angle mean
    c2, s2 = np.cos(2 * ang).sum(), np.sin(2 * ang).sum()
    axis_ang = 0.5 * math.atan2(s2, c2)
    dev = np.abs((ang - axis_ang + math.pi / 2) % math.pi - math.pi / 2)
    maxdev = math.degrees(float(dev.max()))
    axis = np.array([math.cos(axis_ang), math.sin(axis_ang)])
    signs = np.sign(dirs @ axis)
    if maxdev <= line_tol_deg:
        if signs.min() < 0 < signs.max():
            return TangentEstimate(PolyhedralCone.line(axis), "line", 180.0, dirs)
        u = axis * signs[0]
        return TangentEstimate(PolyhedralCone.ray(u), "ray", aperture, dirs)
    if aperture <= 2 * ang_tol_deg:
        return TangentEstimate(cone_hull(np.vstack([g1, g2])), "inconclusive", aperture, dirs,
                               "narrow cone: ray versus sector undecided")
    if abs(aperture - 180.0) <= ang_tol_deg:
        t = g1 - g2
        t /= np.linalg.norm(t)
        inward = np.array([-t[1], t[0]])
        if inward @ (g1 + g2 + dirs.mean(axis=0)) < 0:
            inward = -inward
        interior = np.degrees(np.arcsin(np.clip(np.abs(dirs @ inward), 0, 1)))
        if interior.max() <= ang_tol_deg:
            return TangentEstimate(PolyhedralCone.line(t), "inconclusive", aperture, dirs,
                                   "line versus halfplane undecided")
        cone = PolyhedralCone(2, np.vstack([t, -t, inward]))
        return TangentEstimate(cone, "halfplane", aperture, dirs)
    return TangentEstimate(cone_hull(np.vstack([g1, g2])), "sector", aperture, dirs)


def estimate_tangent_cone_info(S: SampledSet, a, scales=None,
                               ang_tol_deg=CLUSTER_TOL_DEG) -> TangentEstimate:
    """Multiscale secant clustering; finest-scale clusters stable across scales are kept."""
    i = S.index_of(a)
    if scales is None:
        diam = S.diameter
        scales = [diam / 50, diam / 100, diam / 200]
    scales = sorted(float(s) for s in scales)
    if len(scales) < 2:
        raise ValueError("at least two scales required")
    tol = math.radians(ang_tol_deg)
    per_scale = []
    fine_len = None
    for s in scales:
        dirs = _secants(S, i, s, scales[-1])
        if fine_len is None:
            fine_len = _secant_lengths(S, i, s) if len(dirs) else np.zeros(0)
        means, labels = _cluster(dirs, tol) if len(dirs) else (dirs, np.zeros(0, int))
        per_scale.append((dirs, means, labels))
    fine_dirs, fine_means, fine_labels = per_scale[0]
    stable = []
    for c, m in enumerate(fine_means):
        ok = True
        for _, means, _ in per_scale[1:]:
            if len(means) == 0 or (means @ m).max() < math.cos(1.5 * tol):
                ok = False
                break
        if ok:
            stable.append(c)
    kept = fine_dirs[np.isin(fine_labels, stable)] if len(fine_dirs) else fine_dirs
    if S.dim == 2:
        est = planar_cone_kind(kept, ang_tol_deg=ang_tol_deg)
        if est.kind == "inconclusive" and len(kept) >= 6:
            kept_len = fine_len[np.isin(fine_labels, stable)]
            alt = planar_cone_kind(_curvature_corrected(kept, kept_len), ang_tol_deg=ang_tol_deg)
            if alt.kind in ("line", "ray"):
                alt.note = "curvature-corrected secants"
                return alt
        return est
    if len(kept) == 0:
        return TangentEstimate(PolyhedralCone.trivial(S.dim), "trivial", 0.0, kept)
    means = fine_means[stable]
    cone = cone_hull(means, S.dim)
    kind = "full" if cone.full_space else "generic"
    return TangentEstimate(cone, kind, math.nan, kept)


def estimate_tangent_cone(S: SampledSet, a, scales=None) -> PolyhedralCone:
    return estimate_tangent_cone_info(S, a, scales).cone


# ------------------------------------------------------------------ normal probing

@dataclass
class NormalProbe:
    index: int
    base: np.ndarray
    probe_radius: float
    normal_directions: np.ndarray

    def hull(self):
        """conv({0} and the kept unit normals)."""
        d = len(self.base)
        return Polytope(np.vstack([np.zeros((1, d)), self.normal_directions]))

    def support(self, w):
        if len(self.normal_directions) == 0:
            return np.zeros(len(np.atleast_2d(w)))
        return np.maximum(0.0, (np.atleast_2d(w) @ self.normal_directions.T).max(axis=1))


def _seed_directions(S, i):
    if not S.has_cones:
        return np.zeros((0, S.dim))
    pol = polar_cone(S.tangent_cones[i])
    if pol.full_space:
        e = np.eye(S.dim)
        return np.vstack([e, -e])
    return pol.canonical_generators()


def normal_cone_probe(S: SampledSet, a, r: float, net: SphereNet, tol: float | None = None,
                      seeds: bool = True) -> NormalProbe:
    """Directions v (net plus dual-cone seeds) whose probe point a + r v projects back to a."""
    if r <= 0:
        raise ValueError("probe radius must be positive")
    i = S.index_of(a)
    p = S.points[i]
    cand = net.directions
    if seeds:
        cand = np.vstack([cand, _seed_directions(S, i)])
    z = p + r * cand
    tol = 1e-9 * max(1.0, r) if tol is None else tol
    d, _ = S.tree.query(z)
    keep = r <= d + tol
    dirs = cand[keep]
    if len(dirs):
        dirs = np.unique(np.round(dirs, 12), axis=0)
    return NormalProbe(i, p.copy(), float(r), dirs)


@dataclass
class SingularReport:
    k: int
    epsilon: float
    singular_points: np.ndarray
    radii: np.ndarray
    probe_radius: float

    def to_dict(self, S=None):
        out = {"k": self.k, "epsilon": self.epsilon,
               "singular_points": self.singular_points.tolist(),
               "radii": self.radii.tolist(), "probe_radius": self.probe_radius}
        if S is not None:
            out["coordinates"] = S.points[self.singular_points].tolist()
        return out


def normal_hull_radius(probe: NormalProbe, m: int) -> float:
    if m <= 0:
        return math.inf
    if len(probe.normal_directions) == 0:
        return 0.0
    return polytope_inscribed_ball(probe.hull(), m)[0]


def ksingular_detect(S: SampledSet, k: int, eps: float, r: float, net: SphereNet,
                     indices=None, threads=None) -> SingularReport:
    """Sample points whose probed unit-normal hull holds a (d-k)-ball of radius eps."""
    d = S.dim
    if not 0 <= k < d:
        raise ValueError("need 0 <= k < d")
    idx = range(S.n) if indices is None else list(indices)

    def radius(i):
        if S.has_cones and S.tangent_cones[i].full_space:
            return 0.0
        return normal_hull_radius(normal_cone_probe(S, i, r, net), d - k)

    radii = np.array(_pmap(radius, idx, threads), dtype=float)
    idx = np.asarray(list(idx), dtype=int)
    sing = idx[radii >= eps - 1e-12]
    return SingularReport(k, eps, sing, radii, r)


# ------------------------------------------------------------------ restriction / attachment

def restrict_to_ball(S: SampledSet, center, rho: float) -> SampledSet:
    center = np.asarray(center, dtype=float)
    dist = np.linalg.norm(S.points - center, axis=1)
    inside = np.flatnonzero(dist <= rho)
    if len(inside) == 0:
        raise ValueError("ball does not meet the sample")
    out = S.subset(inside, label=f"{S.label}|B({center.tolist()},{rho})")
    near = np.abs(dist[inside] - rho) <= max(S.spacing, 1e-12)
    out.meta = dict(S.meta, reestimate=np.flatnonzero(near).tolist())
    return out


def prilep_attach(S: SampledSet, a, u, rho: float, n_seg: int = 50,
                  check: bool = True) -> SampledSet:
    """Attach the segment {a - t u : 0 < t <= rho/4} at a point whose tangent cone is span+{u}."""
    i = S.index_of(a)
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    cone = S.cone(i)
    if not (len(cone.canonical_generators()) == 1 and cone.contains(u)):
        raise ValueError("tangent cone at the attachment point is not the ray span+{u}")
    p = S.points[i]
    ts = (rho / 4) * np.arange(1, n_seg + 1) / n_seg
    seg = p - ts[:, None] * u
    line = PolyhedralCone.line(u)
    cones = list(S.tangent_cones)
    cones[i] = line
    new_cones = [line] * (n_seg - 1) + [PolyhedralCone.ray(u)]
    out = SampledSet(S.dim, np.vstack([S.points, seg]), cones + new_cones,
                     f"{S.label}+segment", dict(S.meta))
    if check:
        new = np.r_[i, np.arange(S.n, out.n)]
        viol = federer_violations(out, rho / 4, rows=new, limit=1)
        viol += federer_violations(out, rho / 4, cols=new, limit=1)
        if viol:
            v = viol[0]
            raise AssertionError(f"attached set violates reach >= rho/4 at pair {v}")
    out.meta["attached"] = {"index": i, "u": u.tolist(), "rho": rho,
                            "segment": [S.n, out.n]}
    return out


# ------------------------------------------------------------------ distance function

def _depth_below_boundary(S: SampledSet, full, k: int = 8):
    """Distance from each full-cone sample to the complement of nearby boundary cones.

    For a solid cone b + Tan(A, b) this is the smallest -<x - b, n> over its outward
    normals n; other boundary samples fall back to the plain distance.
    """
    idx_b = np.flatnonzero(~full)
    pts = S.points[full]
    d, nb = cKDTree(S.points[idx_b]).query(pts, k=min(k, len(idx_b)))
    d, nb = d.reshape(len(pts), -1), nb.reshape(len(pts), -1)
    normals = {}
    depth = d[:, 0].copy()
    for row in range(len(pts)):
        best = math.inf
        for col in range(nb.shape[1]):
            j = idx_b[nb[row, col]]
            if j not in normals:
                c = S.tangent_cones[j]
                g = polar_cone(c).canonical_generators() if c.span_dim() == S.dim else None
                normals[j] = None if g is None or len(g) == 0 else \
                    g / np.linalg.norm(g, axis=1, keepdims=True)
            n = normals[j]
            h = d[row, col] if n is None else -np.max((pts[row] - S.points[j]) @ n.T)
            best = min(best, h)
        depth[row] = max(best, 0.0)
    return depth


class AugmentedDistance:
    """dist(x, A) from samples thickened by small tangent-cone pieces.

    Each sample a_i contributes Tan(A, a_i) ∩ B(0, rho_i) translated to a_i; this removes
    the spurious concave kinks of a bare point-cloud distance at sample resolution.
    """

    def __init__(self, S: SampledSet, k_near: int = 16):
        S.require_cones()
        self.S = S
        nn = np.where(np.isfinite(S.nn_dist), S.nn_dist, 0.0)
        full = np.array([c.full_space for c in S.tangent_cones])
        fac_full = 0.75 if S.dim <= 2 else 0.9
        self.rho = np.where(full, fac_full * nn, 0.55 * nn)
        # solid boundary cones of a region sample reach over to the interior lattice
        solid = np.array([not c.full_space and c.span_dim() == S.dim and
                          len(c.canonical_generators()) > 0 for c in S.tangent_cones])
        if full.sum() > 1:
            # interior lattice spacing, not the gap to a nearby boundary sample
            d_ff, _ = cKDTree(S.points[full]).query(S.points[full], k=2)
            grow = fac_full * d_ff[:, 1]
            if (~full).any():
                grow = np.minimum(grow, _depth_below_boundary(S, full))
            self.rho[full] = np.maximum(self.rho[full], grow)
        if full.any() and solid.any():
            d_full, _ = cKDTree(S.points[full]).query(S.points[solid])
            reach_over = np.minimum(d_full, 3 * nn[solid])
            self.rho[solid] = np.maximum(self.rho[solid], reach_over)
        self.k = min(k_near, S.n)

    def _piece(self, i, u):
        cone = self.S.tangent_cones[i]
        if cone.is_trivial:
            return np.linalg.norm(u, axis=1)
        proj = cone.project(u)
        norm = np.linalg.norm(proj, axis=1)
        scale = np.where(norm > self.rho[i], self.rho[i] / np.maximum(norm, 1e-300), 1.0)
        return np.linalg.norm(u - proj * scale[:, None], axis=1)

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        _, idx = self.S.tree.query(x, k=self.k)
        idx = idx.reshape(len(x), -1)
        out = np.full(len(x), np.inf)
        for i in np.unique(idx):
            rows = np.flatnonzero((idx == i).any(axis=1))
            d = self._piece(i, x[rows] - self.S.points[i])
            out[rows] = np.minimum(out[rows], d)
        return out


def _ball_grid(center, radius, n):
    d = len(center)
    ax = np.linspace(-radius, radius, n)
    mesh = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1)
    inside = np.linalg.norm(mesh, axis=-1) <= radius + 1e-12
    return mesh + center, inside, ax[1] - ax[0]


@dataclass
class SemiconvexityResult:
    passed: bool
    constant: float
    worst: float
    witness: list | None = None


def distance_semiconvexity_check(S: SampledSet, a, r: float, grid_n: int = 41,
                                 tol: float = 1e-8) -> SemiconvexityResult:
    """Midpoint convexity of d_A + (3/(2r))|x|^2 on grid-aligned triples in B(a, r/2)."""
    a = S.points[S.index_of(a)]
    dA = AugmentedDistance(S)
    grid, inside, _ = _ball_grid(a, r / 2, grid_n)
    shape = inside.shape
    flat = grid.reshape(-1, S.dim)
    vals = np.full(flat.shape[0], np.nan)
    m = inside.reshape(-1)
    pts = flat[m]
    vals[m] = dA(pts) + 1.5 / r * np.einsum("ij,ij->i", pts, pts)
    vals = vals.reshape(shape)
    worst, wit = math.inf, None
    for ax in range(S.dim):
        sl = [slice(None)] * S.dim
        lo, mid, hi = list(sl), list(sl), list(sl)
        lo[ax], mid[ax], hi[ax] = slice(0, -2), slice(1, -1), slice(2, None)
        second = vals[tuple(lo)] + vals[tuple(hi)] - 2 * vals[tuple(mid)]
        valid = np.isfinite(second)
        if valid.any():
            k = np.nanargmin(np.where(valid, second, np.nan))
            v = second.reshape(-1)[k]
            if v < worst:
                worst = float(v)
                pos = list(np.unravel_index(k, second.shape))
                pos[ax] += 1
                wit = grid[tuple(pos)].tolist()
    if not math.isfinite(worst):
        worst = 0.0
    return SemiconvexityResult(worst >= -tol, 3.0 / r, worst, wit)


@dataclass
class ClarkeResult:
    passed: bool
    max_error: float
    directions: np.ndarray = field(repr=False, default=None)


def clarke_subgradient_check(S: SampledSet, x, r: float, net: SphereNet,
                             tol: float = 1e-3) -> ClarkeResult:
    """Finite-difference d_A'(x; w) against the support function of probed Nor ∩ B(0,1)."""
    i = S.index_of(x)
    p = S.points[i]
    probe = normal_cone_probe(S, i, 0.5 * r, net)
    dA = AugmentedDistance(S)
    t = min(1e-4, 0.2 * dA.rho[i]) if dA.rho[i] > 0 else 1e-4
    w = np.vstack([net.directions, probe.normal_directions]) if len(probe.normal_directions) \
        else net.directions
    fd = (dA(p + t * w) - dA(p[None, :])) / t
    sup = probe.support(w)
    err = float(np.abs(fd - sup).max())
    return ClarkeResult(err <= tol, err, w)


# ------------------------------------------------------------------ semiconcave boundary cover

@dataclass
class Patch:
    direction: np.ndarray
    center: np.ndarray
    frame: np.ndarray  # rows: orthonormal basis of direction-perp
    members: np.ndarray
    w: np.ndarray
    psi: np.ndarray
    lipschitz: float
    quad_worst: float
    passed: bool
    witness: tuple | None = None


@dataclass
class BoundaryCover:
    net: SphereNet
    r: float
    constant: float
    patches: list
    covered: np.ndarray
    passed: bool
    precondition_ok: bool
    witness: dict | None = None

    def to_dict(self):
        return {
            "r": self.r, "constant": self.constant, "constant_formula": "32/(3r)",
            "net_size": len(self.net), "patches": len(self.patches),
            "passed": self.passed, "precondition_ok": self.precondition_ok,
            "all_covered": bool(self.covered.all()), "witness": self.witness,
        }


def _perp_frame(v):
    d = len(v)
    _, _, vt = np.linalg.svd(v[None, :])
    return vt[1:d]


def _greedy_centers(points, radius):
    centers = []
    remaining = np.ones(len(points), dtype=bool)
    dist = np.full(len(points), np.inf)
    k = 0
    while True:
        centers.append(k)
        dist = np.minimum(dist, np.linalg.norm(points - points[k], axis=1))
        remaining = dist > radius
        if not remaining.any():
            break
        k = int(np.argmax(dist))
    return points[centers]


def semiconcave_boundary_cover(S: SampledSet, r: float, center=None, normals=None,
                               net: SphereNet | None = None, lip: float = 3.0) -> BoundaryCover:
    """Cover by graphs over v-perp (v in a 1/4-net) certified 3-Lipschitz and 32/(3r)-semiconcave."""
    d = S.dim
    net = build_sphere_net(d, 0.25) if net is None else net
    c_const = 32.0 / (3.0 * r)
    if normals is None:
        local = federer_reach_estimate(S).per_point if S.has_cones else np.full(S.n, r)
        normals = []
        for i in range(S.n):
            pr = 0.5 * min(r, local[i]) if math.isfinite(local[i]) else 0.5 * r
            normals.append(normal_cone_probe(S, i, max(pr, 1e-12), net).normal_directions)
    precondition_ok = all(len(nv) > 0 for nv in normals)
    pre_viol = bool(S.has_cones and federer_violations(S, r, limit=1))
    centers = _greedy_centers(S.points, r / 2) if center is None \
        else np.atleast_2d(np.asarray(center, dtype=float))
    covered = np.zeros(S.n, dtype=bool)
    patches, witness, all_pass = [], None, True
    for c in centers:
        in_ball = np.flatnonzero(np.linalg.norm(S.points - c, axis=1) <= r / 2)
        for v in net.directions:
            members, nx = [], []
            for i in in_ball:
                nv = normals[i]
                if len(nv) == 0:
                    continue
                dd = np.linalg.norm(nv - v, axis=1)
                j = int(np.argmin(dd))
                if dd[j] < 0.25:
                    members.append(i)
                    nx.append(nv[j])
            if not members:
                continue
            members = np.array(members)
            nx = np.array(nx)
            frame = _perp_frame(v)
            rel = S.points[members] - c
            w = rel @ frame.T
            psi = rel @ v
            dw = np.linalg.norm(w[:, None, :] - w[None, :, :], axis=2)
            dpsi = psi[None, :] - psi[:, None]  # psi(q) - psi(p), row p
            with np.errstate(divide="ignore", invalid="ignore"):
                slope = np.where(dw > 0, np.abs(dpsi) / dw, np.where(np.abs(dpsi) > 1e-12, np.inf, 0))
            lip_val = float(slope.max())
            # h_p(Delta) = -<Delta, n_p>/<v, n_p> with Delta lifted to v-perp
            delta = (w[None, :, :] - w[:, None, :]) @ frame  # ambient Delta, row p
            hp = -np.einsum("pqd,pd->pq", delta, nx) / (nx @ v)[:, None]
            resid = dpsi - hp - c_const * dw ** 2
            qworst = float(resid.max())
            ok = lip_val <= lip + 1e-9 and qworst <= 1e-9
            wit = None
            if not ok:
                all_pass = False
                if lip_val > lip + 1e-9:
                    p, q = np.unravel_index(int(np.argmax(slope)), slope.shape)
                    wit = ("lipschitz", int(members[p]), int(members[q]), lip_val)
                else:
                    p, q = np.unravel_index(int(np.argmax(resid)), resid.shape)
                    wit = ("quadratic", int(members[p]), int(members[q]), qworst)
                if witness is None:
                    witness = {"check": wit[0], "pair": [wit[1], wit[2]], "value": wit[3],
                               "direction": v.tolist()}
            covered[members] = True
            patches.append(Patch(v, c, frame, members, w, psi, lip_val, qworst, ok, wit))
    if center is not None:
        in_any = np.linalg.norm(S.points - centers[0], axis=1) <= r / 2
        covered_ok = bool(covered[in_any].all())
    else:
        covered_ok = bool(covered.all())
    return BoundaryCover(net, r, c_const, patches, covered, all_pass and covered_ok,
                         precondition_ok and not pre_viol, witness)
