import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from reachkit import io
from reachkit.convex import semiconcave_check
from reachkit.geometry import polar_cone
from reachkit.fixtures import (
    FixtureSpec, ak_phi, gen_ak, gen_ak_theta, gen_controls, gen_smycka, make_fixture,
    smycka_dpsi, smycka_psi,
)
from reachkit.planar import classify_point
from reachkit.reach import federer_reach_estimate, federer_violations, reach_bisection


def boundary(S):
    return np.flatnonzero([not c.full_space for c in S.tangent_cones])


# ---------------------------------------------------------------- determinism

@pytest.mark.parametrize("spec", ["ak:K=0;0.5;1,n=200", "ak_theta:K=0;0.5;1,theta=0;1.2,n=200",
                                  "smycka:range=1,n=401", "circle:r=2,n=100",
                                  "filled_polygon:m=5,pitch=0.1"])
def test_byte_deterministic(spec):
    a = io.dumps(io.dump_object(make_fixture(spec)))
    b = io.dumps(io.dump_object(make_fixture(spec)))
    assert a == b


def test_spec_parse():
    s = FixtureSpec.parse("ak:K=0;0.5;1,n=300,seed=4")
    assert s.name == "ak" and s.params == {"K": [0, 0.5, 1], "n": 300} and s.seed == 4
    assert FixtureSpec.parse("circle").params == {}
    assert FixtureSpec.parse("ak_theta:theta=0;pi").params["theta"] == [0, math.pi]


# ---------------------------------------------------------------- A_K

def test_ak_singleton_rejected():
    with pytest.raises(ValueError):
        gen_ak([0.5], 100)
    with pytest.raises(ValueError):
        gen_ak([1.0, 1.0], 100)


def test_ak_lens_between_graphs():
    S = gen_ak([0.0, 1.0], 400)
    x, y = S.points.T
    phi = ak_phi([0.0, 1.0])(x)
    assert x.min() == 0.0 and x.max() == 1.0
    assert np.all(np.abs(y) <= phi + 1e-12)
    bd = boundary(S)
    assert np.abs(np.abs(y[bd]) - phi[bd]).max() <= 1e-12
    assert S.meta["semiconcavity_constant"] == 2.0


def test_ak_two_lenses_pinched():
    S = gen_ak([0.0, 0.5, 1.0], 400)
    x, y = S.points.T
    at = np.flatnonzero(np.abs(x - 0.5) < 1e-12)
    assert len(at) == 1 and y[at[0]] == 0.0
    # the joint carries the line cone along the x-axis
    c = S.tangent_cones[at[0]]
    assert c.contains([1.0, 0.0], 1e-12) and c.contains([-1.0, 0.0], 1e-12)
    assert not c.contains([0.0, 1.0], 1e-6)


def test_ak_top_corner_is_t1():
    S = gen_ak([0.0, 1.0], 800)
    assert classify_point(S, [0.5, 0.25]).verdict == "T1"


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 32), min_size=2, max_size=5, unique=True))
def test_phi_semiconcavity_constant(k):
    # dist(., K)^2 - x^2 is concave; any K point makes c < 2 fail at its kink
    K = np.array(sorted(k)) / 8
    x = np.linspace(K[0], K[-1], int(round((K[-1] - K[0]) * 64)) + 1)
    u = ak_phi(K)(x)
    assert semiconcave_check(x, u, 2.0).passed
    bad = semiconcave_check(x, u, 1.9)
    assert not bad.passed and bad.witness is not None


def test_ak_bisection_stable_under_refinement():
    t1 = reach_bisection(gen_ak([0.0, 1.0], 50), iters=20)
    t2 = reach_bisection(gen_ak([0.0, 1.0], 100), iters=20)
    assert t1 > 0 and abs(t2 - t1) <= 0.1 * t1
    # curvature radius of x^2 at the lens tips
    assert t2 == pytest.approx(0.5, rel=1e-3)
    S = gen_ak([0.0, 1.0], 100)
    assert federer_violations(S, 0.99 * t2) == []


# ---------------------------------------------------------------- A_K^Theta

def test_ak_theta_length_mismatch():
    with pytest.raises(ValueError):
        gen_ak_theta([0.0, 0.5, 1.0], [0.0], 100)
    with pytest.raises(ValueError):
        gen_ak_theta([0.0, 1.0], [0.0, 1.0], 100)


def test_ak_theta_zero_is_planar():
    K = [0.0, 0.3, 1.0, 1.5]
    A = gen_ak(K, 300)
    B = gen_ak_theta(K, [0.0, 0.0, 0.0], 300)
    assert B.dim == 3 and B.n == A.n
    assert np.abs(B.points[:, :2] - A.points).max() <= 1e-12
    assert np.abs(B.points[:, 2]).max() <= 1e-12
    for ca, cb in zip(A.tangent_cones, B.tangent_cones):
        # a full planar cone becomes the xy-plane, which is not full in R^3
        assert not cb.full_space
        assert np.abs(cb.generators[:, :2] - ca.generators).max() <= 1e-12


def test_ak_theta_orthogonal_lenses():
    B = gen_ak_theta([0.0, 0.5, 1.0], [0.0, math.pi / 2], 400)
    x, y, z = B.points.T
    left, right = x < 0.5, x > 0.5
    assert np.abs(z[left]).max() <= 1e-12 and np.abs(y[left]).max() > 0.01
    assert np.abs(y[right]).max() <= 1e-12 and np.abs(z[right]).max() > 0.01
    joint = np.flatnonzero(np.linalg.norm(B.points - [0.5, 0.0, 0.0], axis=1) < 1e-12)
    assert len(joint) == 1


def test_ak_theta_dense_angles_builds():
    K = [0.0, 0.25, 0.5, 0.75, 1.0]
    B = gen_ak_theta(K, [0.0, 1.0, 2.0, 3.0], 200)
    assert B.dim == 3 and B.meta["theta"] == [0.0, 1.0, 2.0, 3.0]


# ---------------------------------------------------------------- smycka

def test_smycka_self_approach(smycka):
    C, S = smycka
    e = 3 * math.exp(-9)
    assert np.allclose(C.points[0], [9.0, -e], atol=1e-12, rtol=0)
    assert np.allclose(C.points[-1], [9.0, e], atol=1e-12, rtol=0)
    assert np.linalg.norm(C.points[-1] - C.points[0]) == pytest.approx(2 * e, rel=1e-9)
    assert C.open_ends == (True, True)


def test_smycka_unit_speed(smycka):
    # consecutive knots are one pitch apart along the curve; chords trail by the sagitta only
    C, _ = smycka
    h = np.diff(C.knots)
    chord = np.linalg.norm(np.diff(C.points, axis=0), axis=1)
    assert np.all(chord <= h + 1e-6)
    assert np.abs(chord - h).max() <= 1e-6
    assert np.allclose(C.knots[[0, -1]], [-C.length / 2, C.length / 2])


def test_smycka_knots_on_curve(smycka):
    C, _ = smycka
    # every sample lies on psi: recover t from x = t^2 and the sign of y
    t = np.sign(C.points[:, 1]) * np.sqrt(C.points[:, 0])
    assert np.abs(smycka_psi(t) - C.points).max() <= 1e-12


def test_smycka_lambda_grid_minimum(smycka):
    C, _ = smycka
    t = np.linspace(-3, 3, 600001)
    speed2 = 4 * t ** 2 + np.exp(-2 * t ** 2) * (1 - 2 * t ** 2) ** 2
    assert speed2.min() > 0
    assert np.allclose(np.sum(smycka_dpsi(t) ** 2, axis=1), speed2, rtol=1e-12)
    assert C.meta["lambda"] == pytest.approx(math.sqrt(speed2.min()), rel=1e-4)
    assert C.meta["derivative_lipschitz_bound"] == pytest.approx(
        2 * C.meta["M"] / C.meta["lambda"] ** 2)


def test_smycka_short_piece_positive_reach():
    C, S = gen_smycka((-0.5, 0.5), 501)
    est = federer_reach_estimate(S).estimate
    assert est > 0.05
    assert federer_violations(S, 0.9 * est) == []


def test_smycka_range_must_be_symmetric():
    with pytest.raises(ValueError):
        gen_smycka((-1.0, 2.0), 101)


# ---------------------------------------------------------------- controls

def test_circle_control(circle):
    assert federer_reach_estimate(circle).estimate == pytest.approx(1.0, abs=1e-3)
    t = np.arctan2(circle.points[:, 1], circle.points[:, 0])
    u = np.c_[-np.sin(t), np.cos(t)]
    for i in range(0, circle.n, 97):
        c = circle.tangent_cones[i]
        assert c.contains(u[i], 1e-12) and c.contains(-u[i], 1e-12)


def test_two_points_control():
    S = gen_controls("two_points", {"gap": 1.0})
    assert federer_reach_estimate(S).estimate == pytest.approx(0.5, abs=1e-12)
    assert S.meta["reach"] == 0.5


def test_square_vertex_fans(square):
    V = np.array(square.meta["vertices"])
    for v in V:
        i = square.index_of(v)
        c = square.tangent_cones[i]
        inward = -np.sign(v)
        # tangent wedge spanned by the two edges; normal fan is the outward quadrant
        assert c.contains([inward[0], 0.0], 1e-12) and c.contains([0.0, inward[1]], 1e-12)
        assert not c.contains(-inward, 1e-9)
        N = polar_cone(c)
        assert N.contains(np.sign(v), 1e-12)
        assert N.contains([np.sign(v[0]), 0.0], 1e-12) and N.contains([0.0, np.sign(v[1])], 1e-12)
        assert not N.contains(inward, 1e-9)


def test_unknown_control():
    with pytest.raises(ValueError):
        gen_controls("torus", {})
    with pytest.raises(ValueError):
        make_fixture("nonsense:n=3")
