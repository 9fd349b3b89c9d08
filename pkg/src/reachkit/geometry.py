"""Small-dimension cone, polytope and sphere-net primitives (ambient dimension <= 3)."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, QhullError, cKDTree

MAX_DIM = 3
DEFAULT_TOL = 1e-9


class UnsupportedDimension(ValueError):
    pass


def _check_dim(d):
    if d < 1 or d > MAX_DIM:
        raise UnsupportedDimension(f"ambient dimension {d} not in 1..{MAX_DIM}")


def _unit_rows(a, tol=1e-14):
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.size == 0:
        return a.reshape(0, a.shape[-1] if a.ndim == 2 else 0)
    norms = np.linalg.norm(a, axis=1)
    keep = norms > tol
    return a[keep] / norms[keep, None]


def _dedupe_dirs(dirs, tol=1e-9):
    out = []
    for v in dirs:
        if all(np.linalg.norm(v - w) > tol for w in out):
            out.append(v)
    return np.array(out).reshape(len(out), dirs.shape[1] if len(dirs) else 0)


def _null_space(a, d, tol=1e-10):
    """Orthonormal basis (rows) of {x : a x = 0} in R^d."""
    if a.shape[0] == 0:
        return np.eye(d)
    _, s, vt = np.linalg.svd(a)
    rank = int(np.sum(s > tol * max(1.0, s[0])))
    return vt[rank:]


def _extreme_rays(g, d, tol=DEFAULT_TOL):
    """Lineality basis and extreme rays of {u : g u <= 0}.

    Enumerates (q-1)-subsets of constraints in the pointed part, which is cheap
    for q <= 3 and exact up to ``tol``.
    """
    g = np.asarray(g, dtype=float).reshape(-1, d)
    g = g[np.linalg.norm(g, axis=1) > tol]
    lin = _null_space(g, d)
    if g.shape[0] == 0:
        return np.eye(d), np.zeros((0, d))
    q_basis = _null_space(lin, d) if lin.shape[0] else np.eye(d)
    q = q_basis.shape[0]
    if q == 0:
        return lin, np.zeros((0, d))
    gr = g @ q_basis.T
    cands = []
    if q == 1:
        cands = [np.array([1.0]), np.array([-1.0])]
    else:
        for rows in itertools.combinations(range(gr.shape[0]), q - 1):
            sub = gr[list(rows)]
            ns = _null_space(sub, q)
            if ns.shape[0] != 1:
                continue
            cands.extend([ns[0], -ns[0]])
    rays = []
    for y in cands:
        y = y / np.linalg.norm(y)
        if np.all(gr @ y <= tol):
            rays.append(y @ q_basis)
    rays = _dedupe_dirs(np.array(rays).reshape(-1, d)) if rays else np.zeros((0, d))
    return lin, rays


@dataclass(eq=False)
class PolyhedralCone:
    """Closed convex cone generated by unit vectors; ``full_space`` marks R^d."""

    dim: int
    generators: np.ndarray = None
    full_space: bool = False
    _faces: list | None = field(default=None, init=False, repr=False)
    _canon: np.ndarray | None = field(default=None, init=False, repr=False)
    _normal: object = field(default=None, init=False, repr=False)

    def __post_init__(self):
        _check_dim(self.dim)
        if self.generators is None:
            self.generators = np.zeros((0, self.dim))
        g = np.asarray(self.generators, dtype=float).reshape(-1, self.dim)
        if not np.all(np.isfinite(g)):
            raise ValueError("non-finite cone generator")
        self.generators = _unit_rows(g).reshape(-1, self.dim)

    # constructors
    @classmethod
    def trivial(cls, d):
        return cls(d)

    @classmethod
    def full(cls, d):
        e = np.eye(d)
        return cls(d, np.vstack([e, -e]), full_space=True)

    @classmethod
    def ray(cls, u):
        u = np.asarray(u, dtype=float)
        return cls(len(u), u[None, :])

    @classmethod
    def line(cls, u):
        u = np.asarray(u, dtype=float)
        return cls(len(u), np.vstack([u, -u]))

    @classmethod
    def halfspace(cls, normal):
        """{x : <x, normal> <= 0}."""
        normal = np.asarray(normal, dtype=float)
        normal = normal / np.linalg.norm(normal)
        d = len(normal)
        lin = _null_space(normal[None, :], d)
        return cls(d, np.vstack([lin, -lin, -normal[None, :]]))

    @property
    def is_trivial(self):
        return not self.full_space and len(self.generators) == 0

    def canonical_generators(self):
        """Lineality basis (both signs) plus extreme rays."""
        if self._canon is None:
            if self.full_space:
                e = np.eye(self.dim)
                self._canon = np.vstack([e, -e])
            elif len(self.generators) == 0:
                self._canon = np.zeros((0, self.dim))
            else:
                lin_p, rays_p = _extreme_rays(self.generators, self.dim)
                pol = np.vstack([lin_p, -lin_p, rays_p]) if len(lin_p) else rays_p
                if len(pol) == 0:
                    self.full_space = True
                    e = np.eye(self.dim)
                    self._canon = np.vstack([e, -e])
                else:
                    lin, rays = _extreme_rays(pol, self.dim)
                    self._canon = np.vstack([lin, -lin, rays]) if len(lin) else rays
        return self._canon

    def span_dim(self):
        g = self.canonical_generators()
        if self.full_space:
            return self.dim
        if len(g) == 0:
            return 0
        return int(np.linalg.matrix_rank(g, tol=1e-9))

    def _face_projectors(self):
        if self._faces is None:
            g = self.canonical_generators()
            faces = []
            for s in range(1, min(self.dim, len(g)) + 1):
                for idx in itertools.combinations(range(len(g)), s):
                    b = g[list(idx)]
                    gram = b @ b.T
                    if abs(np.linalg.det(gram)) < 1e-12:
                        continue
                    faces.append((b, np.linalg.solve(gram, b)))
            self._faces = faces
        return self._faces

    def project(self, u):
        """Euclidean projection of each row of ``u`` onto the cone."""
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if self.full_space:
            return u.copy()
        best = np.zeros_like(u)
        best_d = np.linalg.norm(u, axis=1)
        for b, pinv in self._face_projectors():
            coef = u @ pinv.T
            feas = np.all(coef >= -1e-12, axis=1)
            if not feas.any():
                continue
            proj = coef @ b
            dist = np.linalg.norm(u - proj, axis=1)
            better = feas & (dist < best_d)
            best[better] = proj[better]
            best_d[better] = dist[better]
        return best

    def _halfspace_normal(self):
        """Outward unit normal when the cone is a half-space, else None."""
        if self._normal is None:
            self._normal = False
            if not self.full_space and len(self.generators):
                pg = polar_cone(self).canonical_generators()
                if len(pg) == 1:
                    self._normal = pg[0]
        return None if self._normal is False else self._normal

    def distance(self, u):
        u = np.atleast_2d(np.asarray(u, dtype=float))
        if self.full_space:
            return np.zeros(len(u))
        nrm = self._halfspace_normal()
        if nrm is not None:
            # Moreau: dist to C is the length of the projection onto the polar ray
            return np.maximum(u @ nrm, 0.0)
        g = self.canonical_generators()
        if len(g) == 1 or (len(g) == 2 and np.abs(g[0] + g[1]).max() <= 1e-12):
            # ray or line: one-face projection
            t = u @ g[0]
            if len(g) == 1:
                t = np.maximum(t, 0.0)
            return np.linalg.norm(u - t[:, None] * g[0], axis=1)
        return np.linalg.norm(u - self.project(u), axis=1)

    def contains(self, u, tol=DEFAULT_TOL):
        return bool(self.distance(u)[0] <= tol * max(1.0, np.linalg.norm(u)))

    def transformed(self, rot):
        """Image under the linear isometry ``rot``."""
        c = PolyhedralCone(self.dim, self.generators @ np.asarray(rot).T, self.full_space)
        return c

    def to_dict(self):
        return {"generators": self.generators.tolist(), "full_space": bool(self.full_space)}


def polar_cone(c: PolyhedralCone) -> PolyhedralCone:
    """{u : <u, g> <= 0 for all generators g}."""
    _check_dim(c.dim)
    if c.full_space:
        return PolyhedralCone.trivial(c.dim)
    if len(c.generators) == 0:
        return PolyhedralCone.full(c.dim)
    lin, rays = _extreme_rays(c.generators, c.dim)
    if len(lin) == c.dim:
        return PolyhedralCone.full(c.dim)
    gens = np.vstack([lin, -lin, rays]) if len(lin) else rays
    return PolyhedralCone(c.dim, gens)


def cone_hull(dirs, d=None) -> PolyhedralCone:
    """Smallest closed convex cone containing the given directions."""
    dirs = np.asarray(dirs, dtype=float)
    if d is None:
        d = dirs.shape[1]
    dirs = _unit_rows(dirs.reshape(-1, d)).reshape(-1, d)
    if len(dirs) == 0:
        return PolyhedralCone.trivial(d)
    c = PolyhedralCone(d, dirs)
    g = c.canonical_generators()
    if c.full_space:
        return PolyhedralCone.full(d)
    return PolyhedralCone(d, g)


def cones_equal(a: PolyhedralCone, b: PolyhedralCone, tol=1e-9) -> bool:
    if a.dim != b.dim:
        return False
    ga, gb = a.canonical_generators(), b.canonical_generators()
    return all(b.contains(g, tol) for g in ga) and all(a.contains(g, tol) for g in gb) \
        and a.full_space == b.full_space


def dist_to_cone(u, c: PolyhedralCone) -> float:
    return float(c.distance(np.asarray(u, dtype=float)[None, :])[0])


def in_cone_nnls(u, c: PolyhedralCone, tol=DEFAULT_TOL) -> bool:
    """Membership by a nonnegative-combination solve, independent of face enumeration."""
    from scipy.optimize import nnls

    u = np.asarray(u, dtype=float)
    if c.full_space:
        return True
    if len(c.generators) == 0:
        return bool(np.linalg.norm(u) <= tol)
    _, res = nnls(c.generators.T, u)
    return bool(res <= tol * max(1.0, np.linalg.norm(u)))


# ---------------------------------------------------------------- polytopes

def _affine_frame(v, tol=1e-10):
    c0 = v.mean(axis=0)
    if len(v) == 1:
        return c0, np.zeros((0, v.shape[1]))
    _, s, vt = np.linalg.svd(v - c0)
    scale = max(1.0, float(np.abs(v).max()))
    rank = int(np.sum(s > tol * scale))
    return c0, vt[:rank]


def _hull_equations(y):
    try:
        hull = ConvexHull(y)
    except QhullError:
        hull = ConvexHull(y, qhull_options="QJ")
    return hull


@dataclass(eq=False)
class Polytope:
    """Bounded polytope stored by its extreme points."""

    vertices: np.ndarray
    dim_ambient: int = None

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if self.dim_ambient is None:
            self.dim_ambient = v.shape[1]
        self.vertices = _extreme_points(v)

    def affine_dim(self):
        return _affine_frame(self.vertices)[1].shape[0]

    def support(self, w):
        """max <w, p> over the polytope, for each row of ``w``."""
        w = np.atleast_2d(w)
        return (w @ self.vertices.T).max(axis=1)

    def to_dict(self):
        return {"vertices": self.vertices.tolist()}


def _extreme_points(v):
    if len(v) == 0:
        return v
    uniq = _dedupe_dirs(v, tol=1e-12) if len(v) < 64 else np.unique(np.round(v, 12), axis=0)
    c0, basis = _affine_frame(uniq)
    a = basis.shape[0]
    if a == 0:
        return uniq[:1]
    y = (uniq - c0) @ basis.T
    if a == 1:
        return uniq[[int(np.argmin(y[:, 0])), int(np.argmax(y[:, 0]))]]
    hull = _hull_equations(y)
    return uniq[np.sort(hull.vertices)]


def _ball_lp(a_mat, b_vec, row_scale):
    """max r s.t. a_i c + r row_scale_i <= b_i."""
    n = a_mat.shape[1]
    cost = np.zeros(n + 1)
    cost[-1] = -1.0
    a_ub = np.hstack([a_mat, row_scale[:, None]])
    bounds = [(None, None)] * n + [(0, None)]
    res = linprog(cost, A_ub=a_ub, b_ub=b_vec, bounds=bounds, method="highs")
    if not res.success:
        return 0.0, np.zeros(n)
    return float(res.x[-1]), res.x[:-1]


def polytope_inscribed_ball(p: Polytope, k: int):
    """Largest k-dimensional ball inside ``p``: (radius, center, basis rows).

    Exact for k equal to the affine dimension (Chebyshev LP) and for k = 1
    (half the diameter).  For 1 < k < affine dim, candidate planes parallel to
    facets, to principal axes and (for few vertices) spanned by vertex
    differences are tried; the result is a lower bound.
    """
    v = p.vertices
    m = v.shape[1]
    c0, basis = _affine_frame(v)
    a = basis.shape[0]
    if k < 1 or k > a:
        return 0.0, c0, np.zeros((0, m))
    y = (v - c0) @ basis.T
    if k == 1:
        diffs = y[:, None, :] - y[None, :, :]
        dd = np.linalg.norm(diffs, axis=2)
        i, j = np.unravel_index(int(np.argmax(dd)), dd.shape)
        direction = (v[j] - v[i]) / dd[i, j]
        return float(dd[i, j] / 2), (v[i] + v[j]) / 2, direction[None, :]
    hull = _hull_equations(y)
    eq = hull.equations
    a_mat, b_vec = eq[:, :-1], -eq[:, -1]
    if k == a:
        r, c = _ball_lp(a_mat, b_vec, np.linalg.norm(a_mat, axis=1))
        return r, c0 + c @ basis, basis.copy()
    # k == 2, a == 3
    cands = []
    for nrm in eq[:, :-1]:
        cands.append(_null_space(nrm[None, :], a))
    _, _, vt = np.linalg.svd(y - y.mean(axis=0))
    for i in range(a):
        cands.append(np.delete(vt, i, axis=0))
    if len(y) <= 10:
        diffs = [y[j] - y[i] for i, j in itertools.combinations(range(len(y)), 2)]
        for u, w in itertools.combinations(diffs, 2):
            q, rr = np.linalg.qr(np.vstack([u, w]).T)
            if abs(rr[1, 1]) > 1e-9:
                cands.append(q.T)
    best = (0.0, np.zeros(a), cands[0])
    seen = []
    for kb in cands:
        proj = np.linalg.norm(a_mat @ kb.T, axis=1)
        key = np.round(np.abs(proj), 9)
        if any(np.array_equal(key, s) for s in seen):
            continue
        seen.append(key)
        r, c = _ball_lp(a_mat, b_vec, proj)
        if r > best[0]:
            best = (r, c, kb)
    r, c, kb = best
    return r, c0 + c @ basis, kb @ basis


def minimal_width(points, relative: bool = False) -> float:
    """Minimal width of the convex hull of points in R^1 or R^2 (rotating calipers).

    Widths are over all ambient directions, so lower-dimensional hulls have width 0,
    unless ``relative`` asks for the width inside the affine hull.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    c0, basis = _affine_frame(pts)
    a = basis.shape[0]
    if a == 0 or (a < pts.shape[1] and not relative):
        return 0.0
    y = (pts - c0) @ basis.T
    if a == 1:
        return float(y.max() - y.min())
    if a > 2:
        raise UnsupportedDimension("minimal_width supports affine dimension <= 2")
    h = y[_hull_equations(y).vertices]  # counter-clockwise
    n = len(h)
    best = math.inf
    j = 1
    for i in range(n):
        e = h[(i + 1) % n] - h[i]
        e_len = np.linalg.norm(e)

        def height(k):
            w = h[k % n] - h[i]
            return abs(e[0] * w[1] - e[1] * w[0]) / e_len

        while height(j + 1) > height(j) + 1e-15:
            j += 1
        best = min(best, height(j))
    return float(best)


# ---------------------------------------------------------------- sphere nets

@dataclass(eq=False)
class SphereNet:
    dim: int
    mesh: float
    directions: np.ndarray
    probe_max: float = math.nan
    certified: bool = False

    def __len__(self):
        return len(self.directions)

    def nearest(self, u):
        tree = cKDTree(self.directions)
        return tree.query(np.atleast_2d(u))


def _fibonacci_sphere(n):
    i = np.arange(n) + 0.5
    phi = np.arccos(1 - 2 * i / n)
    theta = math.pi * (1 + 5 ** 0.5) * i
    return np.column_stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)])


def build_sphere_net(d: int, mesh: float, n_probe: int = 100_000, seed: int = 0) -> SphereNet:
    """Greedy farthest-point net of the unit sphere with a random-probe certificate."""
    if d not in (2, 3):
        raise UnsupportedDimension("sphere nets are built for d in {2, 3}")
    if not 0 < mesh:
        raise ValueError("mesh must be positive")
    if d == 2:
        m = max(3600, int(math.ceil(2 * math.pi / (mesh / 20))))
        ang = 2 * math.pi * np.arange(m) / m
        cand = np.column_stack([np.cos(ang), np.sin(ang)])
        margin = 2 * math.sin(math.pi / m)
    else:
        m = max(20_000, int(math.ceil(4 * math.pi / (mesh / 10) ** 2)))
        cand = np.vstack([np.eye(3), -np.eye(3), _fibonacci_sphere(m)])
        margin = math.sqrt(4 * math.pi / m)
    target = mesh - margin
    chosen = [0]
    dist = np.linalg.norm(cand - cand[0], axis=1)
    while True:
        far = int(np.argmax(dist))
        if len(chosen) >= 2 and dist[far] <= target:
            break
        chosen.append(far)
        dist = np.minimum(dist, np.linalg.norm(cand - cand[far], axis=1))
    dirs = cand[chosen]
    rng = np.random.default_rng(seed)
    probes = _unit_rows(rng.standard_normal((n_probe, d)))
    dmin, _ = cKDTree(dirs).query(probes)
    probe_max = float(dmin.max())
    return SphereNet(d, mesh, dirs, probe_max, probe_max <= mesh + 1e-9)


# ---------------------------------------------------------------- convex polygons

def clip_polygon(poly, a, b):
    """Clip a convex polygon (ccw vertex rows) by the halfplane a.x <= b."""
    out = []
    n = len(poly)
    if n == 0:
        return np.zeros((0, 2))
    vals = poly @ a - b
    for i in range(n):
        p, q = poly[i], poly[(i + 1) % n]
        vp, vq = vals[i], vals[(i + 1) % n]
        if vp <= 0:
            out.append(p)
        if (vp < 0 < vq) or (vq < 0 < vp):
            t = vp / (vp - vq)
            out.append(p + t * (q - p))
    return np.array(out).reshape(-1, 2)


def rotation_2d(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])
