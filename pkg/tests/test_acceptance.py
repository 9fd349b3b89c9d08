"""The twelve acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line, printed in the terminal summary.
"""
import math
import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reachkit.convex import linf_norm_2d, semiconcave_check, sigma_k_eps, zwit_inclusion_check
from reachkit.curves import (
    as_sampled_set, chord_arc_check, curve_reach_bound, decompose_regular_singular,
    estimate_L, quasi_arc_check, uniform_continuity_modulus, verify_c11_graph,
)
from reachkit.fixtures import ak_phi, gen_ak, gen_ak_theta, gen_controls, gen_smycka
from reachkit.geometry import build_sphere_net, cone_hull, cones_equal, polar_cone, rotation_2d
from reachkit.planar import classify_point
from reachkit.reach import (
    federer_reach_estimate, federer_violations, normal_cone_probe, prilep_attach,
    semiconcave_boundary_cover,
)


@pytest.fixture(scope="module")
def smycka4001():
    return gen_smycka((-3.0, 3.0), 4001)


@pytest.fixture(scope="module")
def circle_arc_length():
    # pitch 1e-3, so the modulus and L are resolved well inside 1e-3
    return gen_controls("circle", {"r": 1.0, "n": 6284}, curve=True)


# 1 ------------------------------------------------------------------------------

def test_c01_circle_reach(criterion):
    with criterion(1, "circle reach = 1.0 +- 1e-9 in < 10 s single-threaded") as c:
        S = gen_controls("circle", {"r": 1.0, "n": 2000})
        t0 = time.perf_counter()
        est = federer_reach_estimate(S, threads=1).estimate
        dt = time.perf_counter() - t0
        c.note(f"estimate {est:.12f}, {dt:.2f} s")
        assert abs(est - 1.0) <= 1e-9
        assert dt < 10.0


# 2 ------------------------------------------------------------------------------

def test_c02_two_points_and_polygon(criterion):
    with criterion(2, "two-point set = 0.5 exactly; convex polygon = +inf") as c:
        two = federer_reach_estimate(gen_controls("two_points", {"gap": 1.0})).estimate
        poly = federer_reach_estimate(gen_controls("convex_polygon", {"m": 6, "n": 50})).estimate
        c.note(f"two points {two!r}, polygon {poly!r}")
        assert two == 0.5
        assert poly == math.inf


# 3 ------------------------------------------------------------------------------

def test_c03_smycka_failure(criterion, smycka4001):
    with criterion(3, "smycka: estimate <= 1e-3, quasi-arc fails, rho_bound <= 1e-8") as c:
        curve, S = smycka4001
        est = federer_reach_estimate(S).estimate
        qa = quasi_arc_check(curve, [0.5])
        cert = curve_reach_bound(curve, check=False)
        c.note(f"estimate {est:.3g}, quasi-arc passed={qa.passed}, rho_bound {cert.rho_bound:.4g}")
        assert est <= 1e-3
        assert not qa.passed and qa.witness is not None
        # delta(1/(2L)) is the end-to-end gap 6 exp(-9) at any resolution, so rho = 3 exp(-9) ~ 3.7e-4
        assert cert.rho_bound <= 1e-8


# 4 ------------------------------------------------------------------------------

def test_c04_circle_curve_certificate(criterion, circle_arc_length):
    with criterion(4, "circle: L = 1 +- 1e-3, delta(1/2) = 2 sin(1/4) +- 1e-3, rho = 0.125") as c:
        C = circle_arc_length
        L = estimate_L(C)
        d = uniform_continuity_modulus(C, 0.5)
        cert = curve_reach_bound(C)
        c.note(f"L {L:.6f}, delta {d:.6f}, rho {cert.rho_bound:.8f}")
        assert abs(L - 1.0) <= 1e-3
        assert abs(d - 2 * math.sin(0.25)) <= 1e-3
        assert cert.rho_bound == min(cert.delta / 2, 1 / (8 * cert.L_hat))
        # exact from the formula; 0.125 up to the resolution of L-hat
        assert cert.rho_bound == pytest.approx(0.125, abs=1e-6)
        assert federer_violations(as_sampled_set(C), 0.125) == []


# 5 ------------------------------------------------------------------------------

@pytest.fixture(scope="module")
def ak_big():
    return gen_ak([0.0, 1.0, 2.0], 10000)


def test_c05_planar_classification(criterion, ak_big):
    with criterion(5, "A_K, K = {0,1,2}, n = 1e4: T2/T3/Interior/T1, 0 wrong, <= 5% inconclusive") as c:
        S = ak_big
        expected = {(1.0, 0.0): "T2", (0.0, 0.0): "T3", (2.0, 0.0): "T3",
                    (0.5, 0.25): "T1", (1.5, 0.25): "T1"}
        cases = [(p, v) for p, v in expected.items()]
        full = np.flatnonzero([cn.full_space for cn in S.tangent_cones])
        for i in full[np.linspace(0, len(full) - 1, 25).astype(int)]:
            cases.append((tuple(S.points[i]), "Interior"))
        wrong, inconclusive = [], 0
        for p, want in cases:
            got = classify_point(S, p).verdict
            if got == "Inconclusive":
                inconclusive += 1
            elif got != want:
                wrong.append((p, want, got))
        c.note(f"{S.n} samples, {len(cases)} points, {len(wrong)} wrong, {inconclusive} inconclusive")
        assert S.meta["n"] >= 10 ** 4
        assert wrong == []
        assert inconclusive <= 0.05 * len(cases)


# 6 ------------------------------------------------------------------------------

def _grid_chebyshev_cross(m=2001):
    # inradius of conv{+-e1, +-e2} by brute force over candidate centres
    g = np.linspace(-1, 1, m)
    X, Y = np.meshgrid(g, g)
    return float(np.max((1 - np.abs(X) - np.abs(Y)) / math.sqrt(2)))


def test_c06_sigma_exactness(criterion):
    with criterion(6, "||x||_inf: Sigma^2_0.70 = origin, Sigma^1_0.70 = diagonals, zwit passes") as c:
        f = linf_norm_2d()
        s2 = sigma_k_eps(f, 2, 0.70)
        assert s2.count == 1 and s2.cells[0].kind == "vertex"
        assert np.allclose(s2.cells[0].geometry, 0.0)
        assert s2.cells[0].radius == pytest.approx(_grid_chebyshev_cross(), abs=1e-9)
        s1 = sigma_k_eps(f, 1, 0.70)
        assert s1.count == 4 and all(cell.kind == "edge" for cell in s1.cells)
        corners = set()
        for cell in s1.cells:
            p, q = np.asarray(cell.geometry)
            assert np.allclose(np.abs(p[0]), np.abs(p[1])) and np.allclose(np.abs(q[0]), np.abs(q[1]))
            corners.add(tuple(np.round(p if np.linalg.norm(p) > 0.5 else q, 9)))
        assert corners == {(1, 1), (1, -1), (-1, 1), (-1, -1)}
        for k in (1, 2):
            z = zwit_inclusion_check(f, k, 1.0, grid_n=101)
            c.note(f"zwit k={k}: {z.z_members} members, {len(z.failures)} failures")
            assert z.passed


# 7 ------------------------------------------------------------------------------

def test_c07_semiconcavity_constant(criterion):
    with criterion(7, "dist(., K)^2 semiconcave at c = 2, fails at c = 1.9") as c:
        for K in ([0.0, 1.0], [0.0, 1.0, 2.0], [0.0, 0.3, 1.2, 1.5]):
            x = np.linspace(K[0], K[-1], int(round((K[-1] - K[0]) * 1000)) + 1)
            u = ak_phi(K)(x)
            ok = semiconcave_check(x, u, 2.0)
            bad = semiconcave_check(x, u, 1.9)
            assert ok.passed, K
            assert not bad.passed and bad.witness is not None, K
        c.note("3 K-sets on a 1e-3 grid")


# 8 ------------------------------------------------------------------------------

def test_c08_boundary_cover(criterion, circle, smycka4001):
    with criterion(8, "cover: circle <= |F| patches, 3-Lipschitz, 32/(3r) bound; smycka fails") as c:
        net = build_sphere_net(2, 0.25)
        cov = semiconcave_boundary_cover(circle, 0.9, center=[1.0, 0.0], net=net)
        assert cov.passed and len(cov.patches) <= len(net)
        assert cov.constant == pytest.approx(32 / (3 * 0.9))
        assert all(p.passed and p.lipschitz <= 3 + 1e-9 for p in cov.patches)
        bad = semiconcave_boundary_cover(smycka4001[1], 0.5, center=[9.0, 0.0], net=net)
        c.note(f"circle {len(cov.patches)} patches of |F| = {len(net)}; smycka passed={bad.passed}")
        assert not bad.passed and bad.witness is not None


# 9 ------------------------------------------------------------------------------

def test_c09_prilep(criterion, quarter_arc):
    with criterion(9, "quarter arc + segment: no violations at rho/4, rho = 0.9") as c:
        u = quarter_arc.cone(0).canonical_generators()[0]
        out = prilep_attach(quarter_arc, 0, u, 0.9)
        v = federer_violations(out, 0.9 / 4)
        c.note(f"{out.n} samples, {len(v)} violations")
        assert v == []


# 10 -----------------------------------------------------------------------------

def test_c10_uniform_c11(criterion):
    with criterion(10, "C^{1,1} with c = (2+K)^3/(2 rho): circle patch passes, |w| fails") as c:
        w = np.linspace(-0.5, 0.5, 201)
        K = 1 / math.sqrt(3)
        good = verify_c11_graph(w, -np.sqrt(1 - w ** 2), K, 0.99)
        bad = verify_c11_graph(w, np.abs(w), 1.0, 1.0)
        c.note(f"circle worst {good.worst:.4f} <= {good.constant:.4f}; |w| worst {bad.worst:.3g}")
        assert good.constant == pytest.approx((2 + K) ** 3 / (2 * 0.99))
        assert good.passed
        assert not bad.passed


# 11 -----------------------------------------------------------------------------

def test_c11_decomposition(criterion, circle):
    with criterion(11, "decomposition: arc -> 2 endpoints, circle -> none, A_K^Theta -> x-axis") as c:
        arc = as_sampled_set(gen_controls("arc", {"n": 400}, curve=True))
        # endpoint normal cones are half-discs of inradius exactly 1/2, so eps < 1/2
        D = decompose_regular_singular(arc, 1, 0.4)
        assert list(D.singular) == [0, arc.n - 1]
        assert len(decompose_regular_singular(circle, 1, 0.4).singular) == 0
        n = 400
        T = gen_ak_theta([0.0, 0.5, 1.0], [0.0, math.pi / 2], n)
        # rims carry half-plane normal cones; only eps in (1/2, 1) isolates the axis
        DT = decompose_regular_singular(T, 2, 0.7)
        off = float(np.linalg.norm(T.points[DT.singular][:, 1:], axis=1).max())
        c.note(f"A_K^Theta: {len(DT.singular)} singular, max off-axis {off:.2e}")
        assert len(DT.singular) > 0
        assert off <= 2 * (1.0 / n)


# 12 -----------------------------------------------------------------------------

dirs2 = st.lists(st.tuples(st.floats(-1, 1), st.floats(-1, 1)), min_size=1, max_size=5).map(
    lambda L: np.array([v for v in L if np.linalg.norm(v) > 1e-2] or [(1.0, 0.0)]))
dirs3 = st.lists(st.tuples(*[st.floats(-1, 1)] * 3), min_size=1, max_size=5).map(
    lambda L: np.array([v for v in L if np.linalg.norm(v) > 1e-2] or [(1.0, 0.0, 0.0)]))


@settings(max_examples=40, deadline=None)
@given(st.one_of(dirs2, dirs3))
def _double_polarity(g):
    C = cone_hull(g, g.shape[1])
    assert cones_equal(polar_cone(polar_cone(C)), C, 1e-8)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(0.2, 0.9))
def _subsampling(seed, frac):
    S = gen_controls("parabola", {"a": 1.0, "x_max": 1.5, "n": 151})
    keep = np.sort(np.random.default_rng(seed).choice(S.n, max(2, int(frac * S.n)), replace=False))
    assert federer_reach_estimate(S.subset(keep)).estimate >= federer_reach_estimate(S).estimate - 1e-12


@settings(max_examples=10, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(-5, 5), st.floats(-5, 5), st.floats(0.1, 10))
def _equivariance(theta, tx, ty, lam):
    S = gen_controls("parabola", {"a": 0.7, "x_max": 1.2, "n": 121})
    base = federer_reach_estimate(S).estimate
    moved = federer_reach_estimate(S.transformed(rotation_2d(theta), [tx, ty])).estimate
    scaled = federer_reach_estimate(S.transformed(scale=lam)).estimate
    assert moved == pytest.approx(base, abs=1e-9)
    assert scaled == pytest.approx(lam * base, rel=1e-12)


def _ppr_iv(S, net):
    # <b - a, v> <= |b - a|^2 |v| / (2 rho_a), plus the (h/r)|b - a| sampling allowance
    rep = federer_reach_estimate(S)
    h = S.spacing
    bad = 0
    for i in range(0, S.n, max(1, S.n // 40)):
        rho = rep.per_point[i]
        r = 0.5 * min(rho, 0.25 * S.diameter) if math.isfinite(rho) else 0.25 * S.diameter
        V = normal_cone_probe(S, i, r, net).normal_directions
        if len(V) == 0:
            continue
        D = S.points - S.points[i]
        sq = np.einsum("ij,ij->i", D, D)[:, None]
        rhs = sq / (2 * rho) if math.isfinite(rho) else 0.0
        bad += int(np.sum(D @ V.T > rhs + (h / r) * np.sqrt(sq) + 1e-9))
    return bad


def test_c12_property_suites(criterion, smycka4001):
    with criterion(12, "double polarity, subsampling, equivariance, P_PR (iv), chord-arc") as c:
        _double_polarity()
        _subsampling()
        _equivariance()
        net = build_sphere_net(2, 0.1)
        ppr = sum(_ppr_iv(gen_controls(name, p), net) for name, p in [
            ("circle", {"n": 400}), ("arc", {"n": 200}), ("parabola", {"n": 201, "x_max": 1.0}),
            ("filled_polygon", {"m": 4, "r": 1.0, "pitch": 0.1})])
        assert ppr == 0
        curves = [gen_controls(name, {}, curve=True) for name in ("circle", "arc", "segment", "parabola")]
        curves.append(smycka4001[0])
        cc = [chord_arc_check(C) for C in curves]
        c.note(f"P_PR (iv) violations {ppr}; chord-arc failures {sum(not r.passed for r in cc)}")
        assert all(r.passed for r in cc)
