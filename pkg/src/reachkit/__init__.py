"""Reach estimation, singular sets and planar/curve characterizations of positive-reach sets."""
from .convex import PWLConvex, sigma_k_eps, semiconcave_check, zwit_inclusion_check
from .curves import ArcCurve, curve_reach_bound, decompose_regular_singular, quasi_arc_check
from .fixtures import gen_ak, gen_ak_theta, gen_controls, gen_smycka
from .geometry import PolyhedralCone, Polytope, build_sphere_net, polar_cone
from .planar import classify_point, build_t_patch
from .reach import federer_reach_estimate, federer_violations, ksingular_detect
from .sets import SampledSet

__all__ = [
    "ArcCurve", "PWLConvex", "PolyhedralCone", "Polytope", "SampledSet",
    "build_sphere_net", "build_t_patch", "classify_point", "curve_reach_bound",
    "decompose_regular_singular", "federer_reach_estimate", "federer_violations",
    "gen_ak", "gen_ak_theta", "gen_controls", "gen_smycka", "ksingular_detect",
    "polar_cone", "quasi_arc_check", "semiconcave_check", "sigma_k_eps", "zwit_inclusion_check",
]
