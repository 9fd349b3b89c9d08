"""Planar positive-reach structure: T-patches, envelope extraction and point classification."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .convex import minimal_semiconcavity_constant
from .geometry import PolyhedralCone, build_sphere_net, cone_hull, rotation_2d
from .reach import (
    estimate_tangent_cone_info,
    federer_reach_estimate,
    federer_violations,
    normal_cone_probe,
    prilep_attach,
)
from .sets import SampledSet

SEMICONCAVITY_CAP = 1e3
LINE_SLOPE_TOL = math.tan(math.radians(2.0))


def lipschitz_from_normals(eta: float) -> float:
    """Bound lambda < 1 on the vertical component of unit chords of the graph."""
    if not 0 < eta <= 1:
        raise ValueError("eta must lie in (0, 1]")
    return max(0.75, math.sqrt(16 - eta ** 2) / 4)


def slope_bound(eta: float) -> float:
    lam = lipschitz_from_normals(eta)
    return lam / math.sqrt(1 - lam ** 2)


# ------------------------------------------------------------------ band regions

def one_sided_derivatives(f, s, h=1e-6):
    """Second-order one-sided difference quotients (left, right)."""
    s = np.asarray(s, dtype=float)
    f0 = f(s)
    right = (-3 * f0 + 4 * f(s + h) - f(s + 2 * h)) / (2 * h)
    left = (3 * f0 - 4 * f(s - h) + f(s - 2 * h)) / (2 * h)
    return left, right


def _refine_grid(centers, s0, s1, lo=1e-5, hi=5e-2, n=40):
    pts = []
    offs = np.geomspace(lo, hi, n)
    for c in centers:
        pts.extend([c - offs, c + offs, [c]])
    pts = np.concatenate(pts) if pts else np.zeros(0)
    return pts[(pts >= s0) & (pts <= s1)]


def band_region_sample(top, bottom, s0: float, s1: float, pitch: float,
                       interior_pitch: float | None = None, extra_s=(), refine=(),
                       label: str = "band", deriv_h: float = 1e-7) -> SampledSet:
    """Sample {(s, t) : s0 <= s <= s1, bottom(s) <= t <= top(s)} with analytic tangent cones.

    ``top`` must be semiconcave and ``bottom`` semiconvex; cones come from one-sided
    derivatives of the two graphs.  Interior lattice points get the full cone.
    """
    ip = pitch * 5 if interior_pitch is None else interior_pitch
    m = max(2, int(math.ceil((s1 - s0) / pitch)) + 1)
    s = np.unique(np.concatenate([np.linspace(s0, s1, m), np.asarray(extra_s, float),
                                  _refine_grid(refine, s0, s1)]))
    s = s[(s >= s0) & (s <= s1)]
    T, B = top(s), bottom(s)
    if np.any(B > T + 1e-12):
        raise ValueError("bottom exceeds top")
    h = deriv_h * max(1.0, s1 - s0)
    tl, tr = one_sided_derivatives(top, s, h)
    bl, br = one_sided_derivatives(bottom, s, h)
    full = PolyhedralCone.full(2)
    pts, cones = [], []
    cache = {}

    def cone(gens):
        key = tuple(np.round(np.asarray(gens).reshape(-1), 12))
        if key not in cache:
            cache[key] = cone_hull(np.asarray(gens, dtype=float), 2)
        return cache[key]

    pinch_tol = 1e-12
    for k, sk in enumerate(s):
        left_end, right_end = sk == s0, sk == s1
        pinched = T[k] - B[k] <= pinch_tol
        if pinched:
            g = []
            if not right_end:
                g += [(1, tr[k]), (1, br[k])]
            if not left_end:
                g += [(-1, -tl[k]), (-1, -bl[k])]
            pts.append((sk, 0.5 * (T[k] + B[k])))
            cones.append(cone(g))
            continue
        gt, gb = [], []
        if not right_end:
            gt.append((1, tr[k]))
            gb.append((1, br[k]))
        if not left_end:
            gt.append((-1, -tl[k]))
            gb.append((-1, -bl[k]))
        gt.append((0, -1))
        gb.append((0, 1))
        pts.append((sk, T[k]))
        cones.append(cone(gt))
        pts.append((sk, B[k]))
        cones.append(cone(gb))
        if left_end or right_end:
            side = 1.0 if left_end else -1.0
            nt = int(math.floor((T[k] - B[k]) / pitch))
            for t in np.linspace(B[k], T[k], nt + 2)[1:-1]:
                pts.append((sk, t))
                cones.append(cone([(0, 1), (0, -1), (side, 0)]))
    # interior lattice
    xs = np.arange(s0 + ip / 2, s1, ip)
    margin = 0.25 * ip
    Tx, Bx = top(xs), bottom(xs)
    for x, tx, bx in zip(xs, Tx, Bx):
        if tx - bx <= 2 * margin:
            continue
        ys = np.arange(math.floor(bx / ip) * ip, tx, ip)
        ys = ys[(ys > bx + margin) & (ys < tx - margin)]
        for y in ys:
            pts.append((x, y))
            cones.append(full)
    # extra interior points on the mid-line at refined abscissae
    for sk in _refine_grid(refine, s0, s1):
        tk, bk = float(top(np.array([sk]))[0]), float(bottom(np.array([sk]))[0])
        if tk - bk > 1e-9 and s0 < sk < s1:
            pts.append((sk, 0.5 * (tk + bk)))
            cones.append(full)
    P = np.array(pts, dtype=float)
    return SampledSet(2, P, cones, label)


# ------------------------------------------------------------------ T-patches

@dataclass
class TPatch:
    kind: str
    r: float
    phi: np.ndarray  # rows (s, phi(s))
    psi: np.ndarray | None
    rotation: float = 0.0
    translation: tuple = (0.0, 0.0)
    c_phi: float = math.nan
    c_psi: float = math.nan
    rho: float = math.nan

    def to_dict(self):
        return {"kind": self.kind, "r": self.r, "phi": self.phi.tolist(),
                "psi": None if self.psi is None else self.psi.tolist(),
                "isometry": {"rotation": self.rotation, "translation": list(self.translation)},
                "c_phi": self.c_phi, "c_psi": self.c_psi, "rho": self.rho}


class PatchInvariantError(ValueError):
    pass


def _graph_reach(f, s0, s1, pitch, upper: bool) -> float:
    """Federer estimate for hypo f (upper) or epi f restricted to a graph sample."""
    s = np.linspace(s0, s1, max(3, int(math.ceil((s1 - s0) / pitch)) + 1))
    v = f(s)
    h = 1e-7 * max(1.0, s1 - s0)
    dl, dr = one_sided_derivatives(f, s, h)
    sgn = -1.0 if upper else 1.0
    cones = []
    for k in range(len(s)):
        g = [(0, sgn)]
        if k < len(s) - 1:
            g.append((1, dr[k]))
        if k > 0:
            g.append((-1, -dl[k]))
        cones.append(cone_hull(np.array(g, dtype=float), 2))
    S = SampledSet(2, np.c_[s, v], cones, "graph")
    return federer_reach_estimate(S).estimate


def build_t_patch(kind: str, phi, psi=None, r: float = 0.5, pitch: float | None = None,
                  s_frac: float = 0.9) -> SampledSet:
    """Sample a T-patch band over |s| <= s_frac*r (T3: 0 <= s <= s_frac*r) with exact cones.

    The recorded reach lower bound follows the forward direction of the planar theorem.
    """
    kind = kind.upper()
    if kind not in ("T1", "T2", "T3"):
        raise ValueError("kind must be T1, T2 or T3")
    pitch = r / 100 if pitch is None else pitch
    smax = s_frac * r
    s0 = 0.0 if kind == "T3" else -smax
    grid = np.linspace(s0, smax, 401)
    f = phi(grid)
    if abs(phi(np.array([0.0]))[0]) > 1e-12:
        raise PatchInvariantError("phi(0) != 0")
    c_phi = minimal_semiconcavity_constant(grid, f, SEMICONCAVITY_CAP)
    if not math.isfinite(c_phi):
        raise PatchInvariantError("phi is not semiconcave on the patch")
    c_psi = math.nan
    if kind == "T1":
        if psi is not None:
            raise PatchInvariantError("T1 takes no psi")
        bottom = lambda s: np.full_like(np.asarray(s, float), -smax)
        if np.any(f < -smax):
            raise PatchInvariantError("phi leaves the patch box")
    else:
        if psi is None:
            raise PatchInvariantError(f"{kind} needs psi")
        g = psi(grid)
        if abs(psi(np.array([0.0]))[0]) > 1e-12:
            raise PatchInvariantError("psi(0) != 0")
        if np.any(g > f + 1e-12):
            raise PatchInvariantError("psi exceeds phi")
        c_psi = minimal_semiconcavity_constant(grid, -g, SEMICONCAVITY_CAP)
        if not math.isfinite(c_psi):
            raise PatchInvariantError("psi is not semiconvex on the patch")
        dl_f, dr_f = one_sided_derivatives(phi, np.array([0.0]))
        dl_g, dr_g = one_sided_derivatives(psi, np.array([0.0]))
        ders = [dr_f[0], dr_g[0]] + ([dl_f[0], dl_g[0]] if kind == "T2" else [])
        if max(abs(x) for x in ders) > 1e-5:
            raise PatchInvariantError("derivatives at 0 do not vanish")
        bottom = psi
    if kind == "T1":
        rho = min(r / 2, _graph_reach(phi, -smax, smax, pitch / 2, True))
    elif kind == "T2":
        rho = min(r / 2, _graph_reach(phi, -smax, smax, pitch / 2, True),
                  _graph_reach(psi, -smax, smax, pitch / 2, False))
    else:
        phit = lambda s: np.where(np.asarray(s) < 0, np.minimum(s, 0), np.minimum(s, phi(np.maximum(s, 0))))
        psit = lambda s: np.where(np.asarray(s) < 0, np.maximum(-np.asarray(s), 0),
                                  np.maximum(-np.asarray(s), psi(np.maximum(s, 0))))
        rho = min(r / 2, _graph_reach(phit, -smax, smax, pitch / 2, True),
                  _graph_reach(psit, -smax, smax, pitch / 2, False))
    refine = [0.0]
    S = band_region_sample(phi, bottom, s0, smax, pitch, interior_pitch=2 * pitch,
                           refine=refine, label=f"{kind}-patch")
    patch = TPatch(kind, r, np.c_[grid, f], None if kind == "T1" else np.c_[grid, psi(grid)],
                   c_phi=c_phi, c_psi=c_psi, rho=rho)
    S.meta.update(patch=patch, rho=rho)
    return S


# ------------------------------------------------------------------ envelopes

class EmptySlice(ValueError):
    pass


@dataclass
class Envelopes:
    phi: np.ndarray  # rows (s, t) in the frame
    psi: np.ndarray
    bracket_ok: bool
    bracket_worst: float


def _frame_coords(S, i, rot):
    return (S.points - S.points[i]) @ np.asarray(rot).T


def extract_envelopes(S: SampledSet, a, rot, delta: float, r: float, eta: float | None = None,
                      nbins: int = 16, case: str = "T1") -> Envelopes:
    """Per vertical slab, the highest and lowest samples of A ∩ B(0, delta) in the frame."""
    i = S.index_of(a)
    Y = _frame_coords(S, i, rot)
    near = np.linalg.norm(Y, axis=1) < delta
    if S.has_cones:
        # envelopes live on the boundary; interior lattice points only blur them
        near &= ~np.array([c.full_space for c in S.tangent_cones])
    Y = Y[near]
    # slabs no narrower than the largest gap between sample abscissae in the window
    sv = np.sort(Y[np.abs(Y[:, 0]) <= 4 * r, 0])
    if len(sv) > 1:
        gap = float(np.diff(sv).max())
        if gap > 0:
            nbins = min(nbins, max(4, 2 * int(4 * r / gap)))  # even: s = 0 is a slab edge
    edges = np.linspace(-4 * r, 4 * r, nbins + 1)
    phi, psi = [], []
    on_line = np.abs(Y[:, 0]) <= 1e-12 * max(1.0, delta)
    for lo, hi in zip(edges[:-1], edges[1:]):
        m = (Y[:, 0] >= lo) & (Y[:, 0] < hi) & ~on_line
        if not m.any():
            raise EmptySlice(f"no samples with s in [{lo:.3g}, {hi:.3g})")
        sub = Y[m]
        phi.append(sub[np.argmax(sub[:, 1])])
        psi.append(sub[np.argmin(sub[:, 1])])
    line = Y[on_line]
    phi.append(line[np.argmax(line[:, 1])])
    psi.append(line[np.argmin(line[:, 1])])
    phi = np.array(phi)
    psi = np.array(psi)
    phi = phi[np.argsort(phi[:, 0], kind="stable")]
    psi = psi[np.argsort(psi[:, 0], kind="stable")]
    ok, worst = True, 0.0
    if eta is not None:
        eta_star = math.sqrt(1 - eta ** 2) / eta
        s, t = phi[:, 0], phi[:, 1]
        if case == "T1":
            excess = np.maximum(np.abs(t) - eta_star * np.abs(s), 0)
            low = -np.sqrt(np.maximum(delta ** 2 - s ** 2, 0)) >= -eta_star * np.abs(s)
        else:
            t2 = np.r_[t, psi[:, 1]]
            s2 = np.r_[s, psi[:, 0]]
            excess = np.maximum(np.abs(t2) - eta_star * np.abs(s2), 0)
            low = np.zeros(1, dtype=bool)
        worst = float(excess.max())
        ok = worst <= 1e-12 and not low.any()
    return Envelopes(phi, psi, ok, worst)


# ------------------------------------------------------------------ connectivity

class PreconditionError(ValueError):
    pass


def vertical_connectivity_check(S: SampledSet, s: float, t_range, rho: float, eta: float,
                                rot=None, origin=None, slab: float | None = None,
                                net=None) -> bool:
    """Is A ∩ (vertical segment) a single gap-free cluster at sample resolution?"""
    t0, t1 = sorted(t_range)
    delta = 0.5 * (t1 - t0)
    if rho * eta <= delta:
        raise PreconditionError(f"rho*eta = {rho * eta:.4g} <= delta = {delta:.4g}")
    rot = np.eye(2) if rot is None else np.asarray(rot)
    origin = np.zeros(2) if origin is None else np.asarray(origin, dtype=float)
    Y = (S.points - origin) @ rot.T
    slab = S.spacing if slab is None else slab
    m = (np.abs(Y[:, 0] - s) <= slab / 2) & (Y[:, 1] >= t0) & (Y[:, 1] <= t1)
    idx = np.flatnonzero(m)
    if len(idx) == 0:
        return False
    net = build_sphere_net(2, 0.25) if net is None else net
    for i in idx:
        if S.has_cones and S.tangent_cones[i].full_space:
            continue
        probe = normal_cone_probe(S, i, 0.5 * rho, net)
        for v in probe.normal_directions:
            if abs((rot @ v)[1]) < eta - 1e-12:
                raise PreconditionError(f"normal at sample {i} violates |<v,e2>| >= eta")
    t = np.sort(Y[idx, 1])
    gap_tol = 2.0 * S.spacing
    return bool(len(t) == 1 or np.diff(t).max() <= gap_tol)


# ------------------------------------------------------------------ classification

@dataclass
class ClassificationResult:
    verdict: str
    tangent_kind: str
    tangent_cone: PolyhedralCone | None = None
    rotation: np.ndarray | None = None
    phi: np.ndarray | None = None
    psi: np.ndarray | None = None
    certificates: dict = field(default_factory=dict)
    reason: str = ""

    def isometry(self, a):
        rot = self.rotation if self.rotation is not None else np.eye(2)
        return {"rotation": math.atan2(rot[1, 0], rot[0, 0]),
                "translation": (-(rot @ np.asarray(a, float))).tolist()}

    def to_dict(self):
        return {"verdict": self.verdict, "tangent_kind": self.tangent_kind,
                "phi": None if self.phi is None else self.phi.tolist(),
                "psi": None if self.psi is None else self.psi.tolist(),
                "certificates": self.certificates, "reason": self.reason}


def certified_reach_level(S: SampledSet) -> float:
    """r0 = min(Federer estimate, 1), cached on the sample."""
    if "r0" not in S.meta:
        T = S if S.has_cones else S.with_estimated_cones()
        S.meta["r0"] = min(federer_reach_estimate(T).estimate, 1.0)
    return S.meta["r0"]


def _frame_to_e2(out):
    out = out / np.linalg.norm(out)
    return np.array([[out[1], -out[0]], [out[0], out[1]]])


def _frame_to_e1(t):
    t = t / np.linalg.norm(t)
    return np.array([[t[0], t[1]], [-t[1], t[0]]])


def _graph_certs(env_rows, eta, lower=False, half=False):
    """Lipschitz and semiconcavity (semiconvexity if ``lower``) of envelope samples."""
    rows = env_rows[env_rows[:, 0] >= 0] if half else env_rows
    s, t = rows[:, 0], rows[:, 1]
    slopes = np.abs(np.diff(t) / np.diff(s)) if len(s) > 1 else np.zeros(1)
    lip = float(slopes.max())
    bound = slope_bound(eta)
    vals = -t if lower else t
    c = minimal_semiconcavity_constant(s, vals, SEMICONCAVITY_CAP) if len(s) > 2 else 0.0
    return {"lipschitz": lip, "lipschitz_bound": bound, "lipschitz_ok": lip <= bound,
            "semiconcavity": c, "semiconcavity_ok": math.isfinite(c)}


def classify_point(S: SampledSet, a, r0: float | None = None, scales=None,
                   n_seg: int | None = None, _t3: bool = False) -> ClassificationResult:
    """Interior / Isolated / T1 / T2 / T3 verdict at a sample point of a planar set."""
    if S.dim != 2:
        raise ValueError("planar classification needs d = 2")
    i = S.index_of(a)
    info = estimate_tangent_cone_info(S, i, scales)
    kind = info.kind
    if kind == "full":
        return ClassificationResult("Interior", kind, info.cone)
    if kind == "trivial":
        return ClassificationResult("Isolated", kind, info.cone)
    if kind == "inconclusive":
        return ClassificationResult("Inconclusive", kind, info.cone, reason=info.note)
    r0 = certified_reach_level(S) if r0 is None else r0
    if not r0 > 0:
        return ClassificationResult("Inconclusive", kind, info.cone, reason="no positive reach level")
    certs = {"r0": r0}
    if kind == "ray":
        u = info.cone.generators[0]
        T = S if S.has_cones else S.with_estimated_cones()
        if not (len(T.cone(i).canonical_generators()) == 1 and T.cone(i).contains(u, 1e-6)):
            T = T.with_cones(list(T.tangent_cones))
            T.tangent_cones[i] = PolyhedralCone.ray(u)
        rho = r0
        r_star = rho / 4
        eta = 0.5
        delta = 0.9 * r_star * eta / 4
        r = 0.9 * eta * delta / 4
        if n_seg is None:
            n_seg = int(math.ceil(r_star / (r / 8)))
        try:
            aug = prilep_attach(T, i, u, rho, n_seg)
        except (AssertionError, ValueError) as exc:
            return ClassificationResult("Inconclusive", kind, info.cone, reason=f"segment attachment: {exc}")
        aug.meta["r0"] = r_star
        res = classify_point(aug, i, r0=r_star, scales=scales, _t3=True)
        res.tangent_kind = "ray"
        res.tangent_cone = info.cone
        res.certificates["attached_segment"] = aug.meta["attached"]
        if res.verdict == "T2":
            res.verdict = "T3"
        return res
    if kind in ("sector", "halfplane"):
        gens = info.cone.canonical_generators()
        if kind == "halfplane":
            lin = [g for g in gens if any(np.allclose(g, -h) for h in gens)]
            inward = [g for g in gens if not any(np.allclose(g, -h) for h in gens)]
            out = -inward[0]
            eta_p = 1.0
        else:
            bis = gens.sum(axis=0)
            out = -bis / np.linalg.norm(bis)
            eta_p = math.sin(math.radians(info.aperture_deg) / 2)
        rot = _frame_to_e2(out)
        eta = min(0.5, 0.9 * eta_p)
        case = "T1"
    else:  # line
        t = info.cone.canonical_generators()[0]
        rot = _frame_to_e1(t)
        eta = 0.5
        case = "T2"
    result = None
    # any delta below the chain's bound is admissible; shrink when slabs run dry near cusps
    delta = 0.9 * r0 * eta / 4
    floor = 2 * S.nn_dist[i] if np.isfinite(S.nn_dist[i]) else 0.0
    tries = 0
    while True:
        res = _certify_envelopes(S, i, kind, info, rot, eta, case, delta, _t3, certs)
        if res.verdict != "Inconclusive":
            return res
        result = result or res
        delta /= 2
        tries += 1
        if 0.9 * eta * delta / 4 < floor or tries >= 16:
            return result


def _certify_envelopes(S, i, kind, info, rot, eta, case, delta, half, certs):
    certs = dict(certs)
    r = 0.9 * eta * delta / 4
    certs.update(eta=eta, delta=delta, r=r, lambda_=lipschitz_from_normals(eta))
    try:
        env = extract_envelopes(S, i, rot, delta, r, eta, case=case)
    except EmptySlice as exc:
        return ClassificationResult("Inconclusive", kind, info.cone, rot, reason=str(exc),
                                    certificates=certs)
    certs["bracket_ok"] = env.bracket_ok
    certs["bracket_worst"] = env.bracket_worst
    c_phi = _graph_certs(env.phi, eta, half=half)
    certs["phi"] = c_phi
    ok = env.bracket_ok and c_phi["lipschitz_ok"] and c_phi["semiconcavity_ok"]
    psi = None
    if case == "T2":
        c_psi = _graph_certs(env.psi, eta, lower=True, half=half)
        certs["psi"] = c_psi
        psi = env.psi
        zero = np.abs(env.phi[:, 0]) <= 1e-12
        f0 = float(env.phi[zero, 1][0])
        g0 = float(env.psi[np.abs(env.psi[:, 0]) <= 1e-12, 1][0])
        near_f = env.phi[(np.abs(env.phi[:, 0]) <= r) & ~zero]
        near_g = env.psi[(np.abs(env.psi[:, 0]) <= r) & (np.abs(env.psi[:, 0]) > 1e-12)]
        if half:
            near_f = near_f[near_f[:, 0] > 0]
            near_g = near_g[near_g[:, 0] > 0]
        slope = max(np.abs(near_f[:, 1] / near_f[:, 0]).max(initial=0.0),
                    np.abs(near_g[:, 1] / near_g[:, 0]).max(initial=0.0))
        certs.update(phi0=f0, psi0=g0, max_slope_near_0=float(slope))
        ok = ok and c_psi["lipschitz_ok"] and c_psi["semiconcavity_ok"] \
            and abs(f0) <= 1e-9 and abs(g0) <= 1e-9 and slope <= LINE_SLOPE_TOL
    verdict = case if ok else "Inconclusive"
    failed = [k for k, v in certs.items() if k.endswith("_ok") and v is False]
    for key in ("phi", "psi"):
        if key in certs:
            failed += [f"{key}.{k}" for k, v in certs[key].items() if k.endswith("_ok") and not v]
    return ClassificationResult(verdict, kind, info.cone, rot, env.phi, psi, certs,
                                "" if ok else "failed: " + ", ".join(failed))


def patch_violations_at_rho(S: SampledSet) -> list:
    return federer_violations(S, S.meta["rho"], limit=5)


def rotate_patch(S: SampledSet, angle: float, shift=(0.0, 0.0)) -> SampledSet:
    """Apply a rigid motion to a patch sample (cones rotate with it)."""
    return S.transformed(rotation_2d(angle), np.asarray(shift, float))
