"""Arc-length sampled curves: C^{1,1} parameter, chord-arc bounds, quasi-arc modulus, reach bound."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .geometry import PolyhedralCone, build_sphere_net
from .reach import federer_reach_estimate, federer_violations, ksingular_detect
from .sets import SampledSet

CHUNK = 512


@dataclass(eq=False)
class ArcCurve:
    """Curve sampled at increasing arc-length knots; closed curves repeat the first point last."""

    dim: int
    knots: np.ndarray
    points: np.ndarray
    closed: bool = False
    open_ends: tuple = (False, False)
    tangents: np.ndarray | None = None  # optional analytic unit tangents
    label: str = ""
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.knots = np.asarray(self.knots, dtype=float).reshape(-1)
        self.points = np.asarray(self.points, dtype=float).reshape(len(self.knots), self.dim)
        if len(self.knots) < 2:
            raise ValueError("need at least two knots")
        if not np.all(np.isfinite(self.points)):
            raise ValueError("non-finite curve points")
        self.open_ends = tuple(bool(x) for x in self.open_ends)
        if self.closed and np.linalg.norm(self.points[0] - self.points[-1]) > 1e-9:
            raise ValueError("closed curve must repeat its first point")
        if self.tangents is not None:
            self.tangents = np.asarray(self.tangents, dtype=float).reshape(self.points.shape)

    @property
    def length(self):
        return float(self.knots[-1] - self.knots[0])

    @property
    def pitch(self):
        return float(np.diff(self.knots).max())

    def _core(self):
        """Knots and points without the repeated closing point."""
        if self.closed:
            return self.knots[:-1], self.points[:-1]
        return self.knots, self.points

    def param_diff(self, ti, tj):
        """Signed parameter difference t_j - t_i (periodic for closed curves)."""
        d = np.subtract.outer(tj, ti).T if np.ndim(ti) else tj - ti
        if self.closed:
            L = self.length
            d = (d + L / 2) % L - L / 2
        return d

    def to_dict(self):
        return {"dim": self.dim, "knots": self.knots.tolist(), "points": self.points.tolist(),
                "closed": self.closed, "open_ends": list(self.open_ends)}


def _check_monotone(curve):
    if np.any(np.diff(curve.knots) <= 0):
        raise ValueError("knots must be strictly increasing")


def derivatives(curve: ArcCurve) -> np.ndarray:
    """gamma' at the core knots by central differences (one-sided second order at open ends)."""
    _check_monotone(curve)
    t, p = curve._core()
    n = len(t)
    if n < 3:
        raise ValueError("need at least three knots")
    d = np.empty_like(p)
    if curve.closed:
        L = curve.length
        tp = np.r_[t[-1] - L, t, t[0] + L]
        pp = np.vstack([p[-1], p, p[0]])
        d[:] = (pp[2:] - pp[:-2]) / (tp[2:] - tp[:-2])[:, None]
        return d
    h0, h1 = t[1:-1] - t[:-2], t[2:] - t[1:-1]
    # non-uniform central difference
    d[1:-1] = ((h0 ** 2)[:, None] * (p[2:] - p[1:-1]) + (h1 ** 2)[:, None] * (p[1:-1] - p[:-2])) \
        / (h0 * h1 * (h0 + h1))[:, None]
    a, b = t[1] - t[0], t[2] - t[0]
    d[0] = (-(b ** 2 - a ** 2) * p[0] + b ** 2 * p[1] - a ** 2 * p[2]) / (a * b * (b - a))
    a, b = t[-1] - t[-2], t[-1] - t[-3]
    d[-1] = ((b ** 2 - a ** 2) * p[-1] - b ** 2 * p[-2] + a ** 2 * p[-3]) / (a * b * (b - a))
    return d


def estimate_L(curve: ArcCurve) -> float:
    """max over knot pairs of |gamma'(t_i) - gamma'(t_j)| / |t_i - t_j|."""
    t, _ = curve._core()
    if len(t) < 3:
        raise ValueError("need at least three knots")
    d = derivatives(curve)
    best = 0.0
    for s in range(0, len(t), CHUNK):
        dt = np.abs(curve.param_diff(t[s:s + CHUNK], t))
        dd = np.linalg.norm(d[s:s + CHUNK, None, :] - d[None, :, :], axis=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(dt > 0, dd / dt, 0.0)
        best = max(best, float(q.max()))
    return best


def _snap(curve, x, tol):
    t, p = curve._core()
    dist = np.linalg.norm(p - np.asarray(x, dtype=float), axis=1)
    k = int(np.argmin(dist))
    if dist[k] > tol:
        warnings.warn(f"point snapped to knot at distance {dist[k]:.3g}", stacklevel=3)
    return t[k]


def intrinsic_distance(curve: ArcCurve, x, y, tol: float = 1e-9) -> float:
    tx, ty = _snap(curve, x, tol), _snap(curve, y, tol)
    return float(abs(curve.param_diff(tx, ty)))


def _polyline_at(curve, tq):
    """Piecewise-linear curve point at parameters tq (wrapped for closed curves)."""
    t, p = curve.knots, curve.points
    if curve.closed:
        tq = t[0] + (tq - t[0]) % curve.length
    tq = np.clip(tq, t[0], t[-1])
    return np.stack([np.interp(tq, t, p[:, j]) for j in range(curve.dim)], axis=1)


def uniform_continuity_modulus(curve: ArcCurve, eps: float) -> float:
    """min |gamma(s) - gamma(t)| over intrinsic distance >= eps.

    Knot pairs plus the linearly interpolated points at exactly eps from each knot.
    """
    t, p = curve._core()
    best = math.inf
    for s in range(0, len(t), CHUNK):
        dt = np.abs(curve.param_diff(t[s:s + CHUNK], t))
        ch = np.linalg.norm(p[s:s + CHUNK, None, :] - p[None, :, :], axis=2)
        m = dt >= eps - 1e-12
        if m.any():
            best = min(best, float(ch[m].min()))
    if curve.closed and 2 * eps > curve.length:
        return best
    for sign in (1.0, -1.0):
        tq = t + sign * eps
        ok = np.ones(len(t), bool) if curve.closed else (tq >= t[0]) & (tq <= t[-1])
        if ok.any():
            q = _polyline_at(curve, tq[ok])
            best = min(best, float(np.linalg.norm(q - p[ok], axis=1).min()))
    return best


def as_sampled_set(curve: ArcCurve) -> SampledSet:
    """Curve sample with tangent lines (rays at genuine endpoints)."""
    t, p = curve._core()
    tan = curve.tangents[: len(t)] if curve.tangents is not None else derivatives(curve)
    tan = tan / np.linalg.norm(tan, axis=1)[:, None]
    cones = [PolyhedralCone.line(v) for v in tan]
    if not curve.closed:
        if not curve.open_ends[0]:
            cones[0] = PolyhedralCone.ray(tan[0])
        if not curve.open_ends[1]:
            cones[-1] = PolyhedralCone.ray(-tan[-1])
    return SampledSet(curve.dim, p, cones, curve.label or "curve", dict(curve.meta))


@dataclass
class CurveReachCertificate:
    L_hat: float
    eps: float
    delta: float
    rho_bound: float
    consistent: bool
    formula: str = "min{delta(1/(2L))/2, 1/(8L)}"
    quasi_arc: bool | None = None

    def to_dict(self):
        return {"L_hat": self.L_hat, "eps": self.eps, "delta": self.delta,
                "rho_bound": self.rho_bound, "formula": self.formula,
                "consistent": self.consistent, "quasi_arc": self.quasi_arc}


def curve_reach_bound(curve: ArcCurve, check: bool = True) -> CurveReachCertificate:
    """rho = min{delta/2, 1/(8L)} with delta the modulus at eps = 1/(2L)."""
    L = estimate_L(curve)
    if L * max(curve.length, 1e-300) <= 1e-8:
        return CurveReachCertificate(L, math.inf, math.inf, math.inf, True)
    eps = 1.0 / (2 * L)
    delta = uniform_continuity_modulus(curve, eps)
    rho = min(delta / 2, 1.0 / (8 * L))
    consistent = True
    if check and math.isfinite(rho) and rho > 0:
        consistent = not federer_violations(as_sampled_set(curve), rho, limit=1)
    return CurveReachCertificate(L, eps, delta, rho, consistent)


@dataclass
class ChordArcResult:
    passed: bool
    worst_cc: float  # min over pairs of |y-x| / |t-s|
    worst_tan: float  # max of |y-x-gamma'(s)(t-s)| - 4L|y-x|^2
    witness: tuple | None = None


def chord_arc_check(curve: ArcCurve, L: float | None = None, tol: float = 1e-6) -> ChordArcResult:
    """Check |y-x| >= |t-s|/2 and |y-x-gamma'(s)(t-s)| <= 4L|y-x|^2 for |t-s| < 1/(2L)."""
    L = estimate_L(curve) if L is None else L
    t, p = curve._core()
    d = curve.tangents[: len(t)] if curve.tangents is not None else derivatives(curve)
    lim = math.inf if L <= 0 else 1.0 / (2 * L)
    worst_cc, worst_tan, wit = math.inf, -math.inf, None
    ok = True
    for s0 in range(0, len(t), CHUNK):
        sl = slice(s0, s0 + CHUNK)
        dt = curve.param_diff(t[sl], t)  # row s, column t: t - s
        diff = p[None, :, :] - p[sl, None, :]
        ch = np.linalg.norm(diff, axis=2)
        m = (np.abs(dt) < lim) & (dt != 0)
        if not m.any():
            continue
        ratio = np.where(m, ch / np.where(dt != 0, np.abs(dt), 1), np.inf)
        tanres = np.linalg.norm(diff - d[sl, None, :] * dt[:, :, None], axis=2) - 4 * L * ch ** 2
        tanres = np.where(m, tanres, -np.inf)
        k = np.unravel_index(int(np.argmin(ratio)), ratio.shape)
        worst_cc = min(worst_cc, float(ratio[k]))
        j = np.unravel_index(int(np.argmax(tanres)), tanres.shape)
        worst_tan = max(worst_tan, float(tanres[j]))
        bad_cc = np.abs(dt) / 2 - ch > tol
        bad = (m & bad_cc) | (tanres > tol)
        if bad.any() and ok:
            ok = False
            q = np.unravel_index(int(np.argmax(bad)), bad.shape)
            wit = (s0 + int(q[0]), int(q[1]))
    return ChordArcResult(ok, worst_cc, worst_tan, wit)


@dataclass
class QuasiArcResult:
    passed: bool
    table: dict
    note: str = ""
    witness: dict | None = None


def quasi_arc_check(curve: ArcCurve, eps_grid) -> QuasiArcResult:
    """delta(eps) = min |x1 - x3| over parameter-ordered triples with |x1 - x2| >= eps."""
    if curve.closed:
        return QuasiArcResult(True, {float(e): math.inf for e in eps_grid},
                              "closed curve: property holds vacuously")
    _, p = curve._core()
    n = len(p)
    pitch = curve.pitch
    table, ok, wit = {}, True, None
    for eps in eps_grid:
        best, arg = math.inf, None
        for s0 in range(0, n, CHUNK):
            rows = np.arange(s0, min(n, s0 + CHUNK))
            D = np.linalg.norm(p[rows, None, :] - p[None, :, :], axis=2)
            far = D >= eps
            idx = np.arange(n)[None, :]
            # forward: first j > i with |x_i - x_j| >= eps, then any k > j
            fwd = np.where(far & (idx > rows[:, None]), idx, n)
            jf = fwd.min(axis=1)
            maskf = idx > jf[:, None]
            # backward: last j < i with |x_i - x_j| >= eps, then any k < j
            bwd = np.where(far & (idx < rows[:, None]), idx, -1)
            jb = bwd.max(axis=1)
            maskb = idx < jb[:, None]
            cand = np.where(maskf | maskb, D, np.inf)
            k = np.unravel_index(int(np.argmin(cand)), cand.shape)
            if cand[k] < best:
                best = float(cand[k])
                i, kk = int(rows[k[0]]), int(k[1])
                j = int(jf[k[0]]) if kk > i else int(jb[k[0]])
                arg = (i, j, kk)
        table[float(eps)] = best
        if best < pitch:
            ok = False
            if wit is None:
                wit = {"eps": float(eps), "delta": best, "triple": list(arg)}
    return QuasiArcResult(ok, table, "" if ok else "modulus collapsed below sample pitch", wit)


def _escapes(curve: ArcCurve, end: int, frac: float = 0.1) -> bool:
    _, p = curve._core()
    m = max(3, int(len(p) * frac))
    seg = p[:m][::-1] if end == 0 else p[-m:]
    r = np.linalg.norm(seg, axis=1)
    return bool(np.all(np.diff(r) > 0))


def classify_component(curve: ArcCurve, eps_grid=None) -> tuple[str, dict]:
    """simple_arc / closed_simple / halfline_type / line_type, or curve_without_positive_reach."""
    if curve.closed:
        return "closed_simple", {}
    n_open = sum(curve.open_ends)
    if n_open == 0:
        return "simple_arc", {}
    if eps_grid is None:
        eps_grid = [curve.length / 40, curve.length / 12]
    q = quasi_arc_check(curve, eps_grid)
    esc = [_escapes(curve, e) for e in (0, 1) if curve.open_ends[e]]
    info = {"quasi_arc": q.passed, "escape": all(esc), "table": q.table, "witness": q.witness}
    if not (q.passed and all(esc)):
        return "curve_without_positive_reach", info
    return ("halfline_type" if n_open == 1 else "line_type"), info


@dataclass
class C11Result:
    passed: bool
    constant: float
    worst: float  # max residual / |y-x|^2
    witness: tuple | None = None


def _fd_gradients(w, phi):
    k = w.shape[1]
    if k == 1:
        order = np.argsort(w[:, 0])
        s, f = w[order, 0], phi[order]
        g = np.gradient(f, s)
        out = np.empty_like(g)
        out[order] = g
        return out[:, None]
    # least-squares plane through nearest neighbours
    from scipy.spatial import cKDTree

    tree = cKDTree(w)
    _, nb = tree.query(w, k=min(len(w), 3 * k + 1))
    g = np.empty((len(w), k))
    for i, row in enumerate(nb):
        A = w[row] - w[i]
        g[i] = np.linalg.lstsq(A, phi[row] - phi[i], rcond=None)[0]
    return g


def verify_c11_graph(w, phi, K: float, rho: float, tol: float = 1e-9) -> C11Result:
    """Quadratic Taylor bound |phi(y) - phi(x) - g_x(y-x)| <= c|y-x|^2, c = (2+K)^3/(2 rho)."""
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    phi = np.asarray(phi, dtype=float).reshape(-1)
    dw = np.linalg.norm(w[:, None, :] - w[None, :, :], axis=2)
    dphi = np.abs(phi[:, None] - phi[None, :])
    with np.errstate(divide="ignore", invalid="ignore"):
        lip = np.where(dw > 0, dphi / dw, 0.0).max()
    if lip > K + 1e-9:
        raise ValueError(f"samples are not K-Lipschitz (slope {lip:.4g} > {K:.4g})")
    c = (2 + K) ** 3 / (2 * rho)
    g = _fd_gradients(w, phi)
    delta = w[None, :, :] - w[:, None, :]  # row x, column y
    resid = np.abs(phi[None, :] - phi[:, None] - np.einsum("xyd,xd->xy", delta, g))
    sq = dw ** 2
    excess = resid - c * sq
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(sq > 0, resid / sq, 0.0)
    k = np.unravel_index(int(np.argmax(excess)), excess.shape)
    ok = excess[k] <= tol
    return C11Result(bool(ok), c, float(ratio.max()), None if ok else (int(k[0]), int(k[1])))


@dataclass
class Decomposition:
    regular: np.ndarray
    singular: np.ndarray
    report: object
    checks: dict = field(default_factory=dict)


def decompose_regular_singular(S: SampledSet, k: int, eps: float, r: float | None = None,
                               net=None) -> Decomposition:
    """Split a k-dimensional sample into regular points and the (k-1)-singular part."""
    if k < 1 or k > S.dim:
        raise ValueError("need 1 <= k <= d")
    if r is None:
        est = federer_reach_estimate(S).estimate if S.has_cones else math.inf
        r = 0.5 * min(est, 0.25 * S.diameter)
    net = build_sphere_net(S.dim, 0.25 if S.dim == 3 else 0.1) if net is None else net
    rep = ksingular_detect(S, k - 1, eps, r, net)
    sing = np.sort(rep.singular_points)
    reg = np.setdiff1d(np.arange(S.n), sing)
    checks = {}
    if k == 1 and S.has_cones:
        lines = [len(S.tangent_cones[i].canonical_generators()) == 2 and S.tangent_cones[i].span_dim() == 1
                 for i in reg]
        checks["regular_have_line_cones"] = bool(all(lines))
        checks["singular_not_lines"] = bool(all(
            not (len(S.tangent_cones[i].canonical_generators()) == 2 and S.tangent_cones[i].span_dim() == 1)
            for i in sing))
    return Decomposition(reg, sing, rep, checks)
