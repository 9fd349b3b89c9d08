import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reachkit.fixtures import gen_controls
from reachkit.geometry import PolyhedralCone, build_sphere_net, rotation_2d
from reachkit.reach import (
    clarke_subgradient_check, distance_semiconvexity_check, estimate_tangent_cone,
    estimate_tangent_cone_info, federer_reach_estimate, federer_violations, ksingular_detect,
    metric_projection, normal_cone_probe, normal_hull_radius, prilep_attach, reach_bisection,
    restrict_to_ball, semiconcave_boundary_cover,
)
from reachkit.sets import MissingTangentData, SampledSet


def small_circle(n=360):
    return gen_controls("circle", {"r": 1.0, "n": n})


# ---------------------------------------------------------------- projection

def test_projection_radial():
    S = small_circle()
    idx = metric_projection([2.0, 0.0], S)
    assert len(idx) == 1 and np.allclose(S.points[idx[0]], [1, 0])


def test_projection_centre_is_everything():
    S = small_circle()
    assert len(metric_projection([0.0, 0.0], S)) == S.n


def test_projection_midpoint_two_points():
    S = gen_controls("two_points", {"gap": 1.0})
    assert list(metric_projection([0.5, 0.0], S)) == [0, 1]


# ---------------------------------------------------------------- estimator

def test_circle_estimate(circle):
    rep = federer_reach_estimate(circle)
    assert rep.estimate == pytest.approx(1.0, abs=1e-9)
    assert rep.witness_pair is not None
    assert rep.estimate == pytest.approx(rep.per_point.min())


def test_convex_polygon_is_unbounded(square):
    rep = federer_reach_estimate(square)
    assert math.isinf(rep.estimate) and rep.witness_pair is None


def test_two_points_half():
    rep = federer_reach_estimate(gen_controls("two_points", {"gap": 1.0}))
    assert rep.estimate == 0.5


def test_missing_cones_raise():
    with pytest.raises(MissingTangentData):
        federer_reach_estimate(SampledSet(2, [[0, 0], [1, 0]]))


def test_violations_circle(circle):
    assert federer_violations(circle, 0.9) == []
    v = federer_violations(circle, 1.1)
    assert v and v[0].magnitude >= v[-1].magnitude > 0


def test_violations_polygon_empty(square):
    assert federer_violations(square, 1e6) == []


def test_bisection_agrees_with_estimator():
    S = small_circle(200)
    est = federer_reach_estimate(S).estimate
    t = reach_bisection(S, hi=3.0)
    assert t == pytest.approx(est, rel=1e-9)


def test_violations_threshold_sharp():
    S = gen_controls("parabola", {"a": 1.0, "x_max": 1.0, "n": 201})
    est = federer_reach_estimate(S).estimate
    assert federer_violations(S, est * (1 - 1e-9)) == []
    assert federer_violations(S, est * (1 + 1e-6))


# ---------------------------------------------------------------- properties

@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(0.2, 0.9))
def test_monotone_under_subsampling(seed, frac):
    S = gen_controls("parabola", {"a": 1.0, "x_max": 1.5, "n": 151})
    rng = np.random.default_rng(seed)
    keep = np.sort(rng.choice(S.n, max(2, int(frac * S.n)), replace=False))
    full = federer_reach_estimate(S).estimate
    sub = federer_reach_estimate(S.subset(keep)).estimate
    assert sub >= full - 1e-12


@settings(max_examples=15, deadline=None)
@given(st.floats(0, 2 * math.pi), st.floats(-5, 5), st.floats(-5, 5), st.booleans())
def test_isometry_equivariance(theta, tx, ty, flip):
    S = gen_controls("parabola", {"a": 0.7, "x_max": 1.2, "n": 121})
    R = rotation_2d(theta)
    if flip:
        R = R @ np.diag([1.0, -1.0])
    T = S.transformed(R, [tx, ty])
    assert federer_reach_estimate(T).estimate == pytest.approx(
        federer_reach_estimate(S).estimate, abs=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 10))
def test_scaling(lam):
    S = gen_controls("parabola", {"a": 0.7, "x_max": 1.2, "n": 121})
    base = federer_reach_estimate(S).estimate
    scaled = federer_reach_estimate(S.transformed(scale=lam)).estimate
    assert scaled == pytest.approx(lam * base, rel=1e-12)


@pytest.mark.parametrize("name,params", [
    ("circle", {"n": 400}), ("arc", {"n": 200}), ("parabola", {"n": 201, "x_max": 1.0}),
    ("filled_polygon", {"m": 4, "r": 1.0, "pitch": 0.1}),
])
def test_normal_inequality_on_samples(name, params):
    # <b - a, v> <= |b - a|^2 |v| / (2 rho_a) + sample allowance
    S = gen_controls(name, params)
    rep = federer_reach_estimate(S)
    net = build_sphere_net(2, 0.1)
    h = S.spacing
    for i in range(0, S.n, max(1, S.n // 40)):
        rho = rep.per_point[i]
        r = 0.5 * min(rho, 0.25 * S.diameter) if math.isfinite(rho) else 0.25 * S.diameter
        V = normal_cone_probe(S, i, r, net).normal_directions
        if len(V) == 0:
            continue
        D = S.points - S.points[i]
        lhs = D @ V.T
        sq = np.einsum("ij,ij->i", D, D)[:, None]
        rhs = sq / (2 * rho) if math.isfinite(rho) else 0.0
        allowance = (h / r) * np.sqrt(sq)
        assert np.all(lhs <= rhs + allowance + 1e-9)


def test_interior_points_have_empty_probe():
    S = gen_controls("filled_disk", {"r": 1.0, "pitch": 0.05})
    net = build_sphere_net(2, 0.1)
    full = [i for i, c in enumerate(S.tangent_cones) if c.full_space]
    for i in full[::25]:
        # probe radius above the lattice pitch
        assert len(normal_cone_probe(S, i, 0.1, net).normal_directions) == 0


# ---------------------------------------------------------------- tangent estimation

def test_tangent_segment_interior_and_end():
    S = gen_controls("segment", {"length": 1.0, "n": 201})
    S0 = SampledSet(2, S.points)
    c = estimate_tangent_cone(S0, 100)
    assert c.span_dim() == 1 and len(c.canonical_generators()) == 2
    c = estimate_tangent_cone(S0, 0)
    assert len(c.canonical_generators()) == 1 and c.contains([1.0, 0.0])


def test_tangent_smycka_origin_is_vertical_line(smycka):
    # psi'(0) = (0, 1): the origin is a smooth point with tangent line span{e2}
    _, S = smycka
    S0 = SampledSet(2, S.points)
    info = estimate_tangent_cone_info(S0, [0.0, 0.0])
    assert info.kind == "line"
    assert info.cone.contains([0.0, 1.0], 1e-3) and info.cone.contains([0.0, -1.0], 1e-3)


def test_tangent_needs_two_scales():
    S = small_circle()
    with pytest.raises(ValueError):
        estimate_tangent_cone(SampledSet(2, S.points), 0, scales=[0.1])


# ---------------------------------------------------------------- normals and singular sets

def test_circle_probe_keeps_both_radials():
    S = small_circle(720)
    probe = normal_cone_probe(S, [1.0, 0.0], 0.5, build_sphere_net(2, 0.1))
    V = probe.normal_directions
    assert any(np.allclose(v, [1, 0]) for v in V)
    assert any(np.allclose(v, [-1, 0]) for v in V)


def test_square_vertex_quarter_fan(square, net2):
    probe = normal_cone_probe(square, [1.0, 1.0], 0.5, net2)
    V = probe.normal_directions
    assert np.all(V >= -1e-9)
    ang = np.degrees(np.arctan2(V[:, 1], V[:, 0]))
    assert ang.min() <= 1e-9 and ang.max() >= 90 - 1e-9


def test_polygon_vertices_detected(net2):
    # regular pentagon: exterior angle 72 deg, unit-normal sector hull inradius is closed form
    S = gen_controls("convex_polygon", {"m": 5, "r": 1.0, "n": 20})
    rep = ksingular_detect(S, 0, 0.3, 0.3, net2)
    half = math.radians(36)
    inr = math.sin(half) / (1 + math.sin(half))  # incircle of a unit sector of angle 2*half
    assert inr > 0.3
    V = np.array(gen_controls("convex_polygon", {"m": 5, "r": 1.0, "n": 1}).points)
    got = S.points[rep.singular_points]
    assert len(got) == 5
    assert all(np.min(np.linalg.norm(V - g, axis=1)) < 1e-12 for g in got)


def test_circle_has_no_singular_points(circle, net2):
    assert len(ksingular_detect(circle, 0, 0.05, 0.5, net2).singular_points) == 0


def test_arc_endpoints_detected(quarter_arc, net2):
    rep = ksingular_detect(quarter_arc, 0, 0.4, 0.3, net2)
    assert sorted(rep.singular_points.tolist()) == [0, quarter_arc.n - 1]
    assert rep.radii[0] == pytest.approx(0.5, abs=0.02)


def test_hull_radius_of_halfplane_fan(net2):
    S = gen_controls("segment", {"n": 101})
    probe = normal_cone_probe(S, 0, 0.2, net2)
    assert normal_hull_radius(probe, 2) == pytest.approx(0.5, abs=0.02)


# ---------------------------------------------------------------- restriction and attachment

def test_restrict_circle(circle):
    A = restrict_to_ball(circle, [1.0, 0.0], 0.5)
    assert A.n < circle.n
    assert federer_violations(A, 0.5) == []
    assert A.meta["reestimate"]


def test_restrict_identity_and_miss(circle):
    assert restrict_to_ball(circle, [0, 0], 2.0).n == circle.n
    with pytest.raises(ValueError):
        restrict_to_ball(circle, [5.0, 5.0], 1.0)


def test_prilep_quarter_arc(quarter_arc):
    S = quarter_arc
    u = S.cone(0).canonical_generators()[0]
    out = prilep_attach(S, 0, u, 0.9)
    assert out.n == S.n + 50
    assert federer_violations(out, 0.9 / 4) == []


def test_prilep_segment_stays_convex():
    S = gen_controls("segment", {"n": 51})
    out = prilep_attach(S, 0, [1.0, 0.0], 0.8)
    assert math.isinf(federer_reach_estimate(out).estimate)


def test_prilep_rejects_line_cone(circle):
    with pytest.raises(ValueError):
        prilep_attach(circle, 0, [0.0, 1.0], 0.5)


# ---------------------------------------------------------------- distance function

def test_semiconvexity_circle(circle):
    res = distance_semiconvexity_check(circle, [1.0, 0.0], 0.9)
    assert res.passed and res.constant == pytest.approx(3 / 0.9)


def test_semiconvexity_polygon():
    S = gen_controls("filled_polygon", {"m": 4, "r": 1.0, "pitch": 0.02})
    assert distance_semiconvexity_check(S, S.points[0], 0.8).passed


def test_semiconvexity_two_points():
    S = gen_controls("two_points", {"gap": 1.0})
    assert distance_semiconvexity_check(S, 0, 0.4).passed


def test_clarke_circle(circle, net2):
    assert clarke_subgradient_check(circle, [1.0, 0.0], 0.9, net2).passed


def test_clarke_interior():
    S = gen_controls("filled_disk", {"r": 1.0, "pitch": 0.05})
    i = int(np.argmin(np.linalg.norm(S.points, axis=1)))
    assert S.cone(i).full_space
    res = clarke_subgradient_check(S, i, 0.5, build_sphere_net(2, 0.1))
    assert res.passed


def test_clarke_isolated_point():
    S = SampledSet(2, [[0.0, 0.0]], [PolyhedralCone.trivial(2)])
    net = build_sphere_net(2, 0.1)
    res = clarke_subgradient_check(S, 0, 1.0, net)
    assert res.passed


# ---------------------------------------------------------------- boundary cover

def test_cover_circle(circle, net2q):
    cov = semiconcave_boundary_cover(circle, 0.9, center=[1.0, 0.0], net=net2q)
    assert cov.passed and cov.all_covered if hasattr(cov, "all_covered") else cov.passed
    assert len(cov.patches) <= len(net2q)
    assert cov.constant == pytest.approx(32 / (3 * 0.9))
    for p in cov.patches:
        assert p.lipschitz <= 3 + 1e-9


def test_cover_segment(net2q):
    S = gen_controls("segment", {"n": 101})
    cov = semiconcave_boundary_cover(S, 0.5, center=[0.5, 0.0], net=net2q)
    assert cov.passed
    assert max(p.quad_worst for p in cov.patches) <= 1e-9


def test_cover_smycka_fails(smycka, net2q):
    _, S = smycka
    cov = semiconcave_boundary_cover(S, 0.5, center=[9.0, 0.0], net=net2q)
    assert not cov.passed and cov.witness is not None
