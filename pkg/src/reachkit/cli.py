"""Command-line front end.

Exit codes: 0 success, 1 certification failure (report carries a witness), 2 input error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import io
from .convex import PWLConvex, sigma_k_eps
from .curves import ArcCurve, as_sampled_set, classify_component, curve_reach_bound, quasi_arc_check
from .fixtures import FixtureSpec, make_fixture
from .geometry import build_sphere_net
from .planar import classify_point
from .reach import federer_reach_estimate, federer_violations, ksingular_detect, semiconcave_boundary_cover
from .sets import SampledSet

FEDERER_FORMULA = "inf |b-a|^2 / (2 dist(b-a, Tan(A,a)))"


class InputError(ValueError):
    pass


def _floats(text):
    try:
        return [float(x) for x in text.split(",")]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from exc


def _load(args, want):
    if (args.fixture is None) == (args.input is None):
        raise InputError("give exactly one of --fixture or --input")
    try:
        obj = make_fixture(FixtureSpec.parse(args.fixture)) if args.fixture else io.load(args.input)
    except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
        raise InputError(str(exc)) from exc
    if want == "set":
        if isinstance(obj, ArcCurve):
            obj = as_sampled_set(obj)
        if not isinstance(obj, SampledSet):
            raise InputError("expected a sampled set")
    elif want == "curve" and not isinstance(obj, ArcCurve):
        raise InputError("expected an arc-length curve")
    elif want == "pwl" and not isinstance(obj, PWLConvex):
        raise InputError("expected a piecewise-linear convex function")
    return obj


def _source(args):
    return {"fixture": args.fixture} if args.fixture else {"input": str(args.input)}


def cmd_estimate_reach(args):
    S = _load(args, "set")
    rep = federer_reach_estimate(S, tol=args.tol)
    report = {"command": "estimate-reach", **_source(args), "n": S.n, "formula": FEDERER_FORMULA,
              "estimate": rep.estimate, "witness_pair": rep.witness_pair, "tol": rep.tol}
    rows = [{"index": i, "x": list(S.points[i]), "local_estimate": v}
            for i, v in enumerate(rep.per_point)]
    return 0, report, rows


def cmd_violations(args):
    S = _load(args, "set")
    vs = federer_violations(S, args.t, tol=args.tol, limit=args.limit)
    report = {"command": "violations", **_source(args), "t": args.t,
              "criterion": "dist(b-a, Tan(A,a)) <= |b-a|^2/(2t)", "count": len(vs),
              "violations": [{"a": v.i, "b": v.j, "magnitude": v.magnitude} for v in vs]}
    rows = [{"a": v.i, "b": v.j, "magnitude": v.magnitude} for v in vs]
    return (1 if vs else 0), report, rows


def cmd_classify_planar(args):
    S = _load(args, "set")
    pts = args.point or []
    if not pts:
        raise InputError("give at least one --point x,y")
    results = []
    for p in pts:
        try:
            res = classify_point(S, p)
        except ValueError as exc:
            raise InputError(str(exc)) from exc
        results.append({"point": p, **res.to_dict()})
    report = {"command": "classify-planar", **_source(args),
              "constants": {"eta": "min(1/2, 0.9 eta')", "delta": "0.9 r0 eta/4", "r": "0.9 eta delta/4"},
              "results": results}
    rows = [{"point": r["point"], "verdict": r["verdict"], "tangent_kind": r["tangent_kind"]}
            for r in results]
    return 0, report, rows


def cmd_curve_cert(args):
    C = _load(args, "curve")
    cert = curve_reach_bound(C)
    grid = args.eps or [C.length / 40, C.length / 12]
    qa = quasi_arc_check(C, grid)
    cert.quasi_arc = qa.passed
    kind, info = classify_component(C, grid)
    failed = (not qa.passed) or (not cert.consistent) or not (cert.rho_bound > 0)
    report = {"command": "curve-cert", **_source(args), "certificate": cert.to_dict(),
              "quasi_arc": {"passed": qa.passed, "table": qa.table, "note": qa.note,
                            "witness": qa.witness},
              "component": kind, "meta": C.meta}
    return (1 if failed else 0), report, []


def cmd_singular_set(args):
    S = _load(args, "set")
    r = args.r
    if r is None:
        est = federer_reach_estimate(S).estimate
        r = 0.5 * min(est, 0.25 * S.diameter)
    net = build_sphere_net(S.dim, args.mesh)
    rep = ksingular_detect(S, args.k, args.eps, r, net)
    report = {"command": "singular-set", **_source(args), "net_size": len(net), **rep.to_dict(S)}
    rows = [{"index": int(i), "radius": float(rep.radii[i])} for i in rep.singular_points]
    return 0, report, rows


def cmd_boundary_cover(args):
    S = _load(args, "set")
    cov = semiconcave_boundary_cover(S, args.r, center=args.center)
    report = {"command": "boundary-cover", **_source(args), **cov.to_dict(),
              "lipschitz_bound": 3.0}
    rows = [{"direction": list(p.direction), "center": list(p.center), "members": len(p.members),
             "lipschitz": p.lipschitz, "quad_worst": p.quad_worst, "passed": p.passed}
            for p in cov.patches]
    return (0 if cov.passed else 1), report, rows


def cmd_gen_fixture(args):
    if args.fixture is None:
        raise InputError("gen-fixture needs --fixture")
    obj = _load(args, "any")
    return 0, io.dump_object(obj), []


def cmd_pwl_sigma(args):
    f = _load(args, "pwl")
    rep = sigma_k_eps(f, args.k, args.eps)
    report = {"command": "pwl-sigma", **_source(args), **rep.to_dict()}
    rows = [{"kind": c.kind, "geometry": c.geometry.tolist(), "radius": c.radius} for c in rep.cells]
    return 0, report, rows


def build_parser():
    p = argparse.ArgumentParser(prog="reachkit", description="Reach estimation and certification.")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--fixture", help="fixture spec, e.g. circle:r=1,n=2000")
        sp.add_argument("--input", help="JSON input file")
        sp.add_argument("--output", default="-", help="report path (default stdout)")
        sp.add_argument("--csv", help="also write the per-item table as CSV")
        sp.add_argument("--threads", type=int, help="worker threads")
        sp.set_defaults(func=fn)
        return sp

    sp = add("estimate-reach", cmd_estimate_reach, "Federer tangent-cone reach estimate")
    sp.add_argument("--tol", type=float)
    sp = add("violations", cmd_violations, "pairs violating the criterion at level t")
    sp.add_argument("--t", type=float, required=True)
    sp.add_argument("--tol", type=float)
    sp.add_argument("--limit", type=int)
    sp = add("classify-planar", cmd_classify_planar, "T1/T2/T3 classification of planar points")
    sp.add_argument("--point", type=_floats, action="append")
    sp = add("curve-cert", cmd_curve_cert, "C^{1,1} curve reach certificate")
    sp.add_argument("--eps", type=_floats, help="quasi-arc eps grid")
    sp = add("singular-set", cmd_singular_set, "points with large normal cones")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--r", type=float)
    sp.add_argument("--mesh", type=float, default=0.25)
    sp = add("boundary-cover", cmd_boundary_cover, "semiconcave graph cover of the boundary")
    sp.add_argument("--r", type=float, required=True)
    sp.add_argument("--center", type=_floats)
    add("gen-fixture", cmd_gen_fixture, "write a fixture as JSON")
    sp = add("pwl-sigma", cmd_pwl_sigma, "singular cells of a max-of-affine function")
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--eps", type=float, required=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads:
        os.environ["REACHKIT_THREADS"] = str(args.threads)
    try:
        code, report, rows = args.func(args)
    except (InputError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    io.write_json(report, args.output)
    if args.csv:
        io.write_csv(rows, args.csv)
    return code


if __name__ == "__main__":
    sys.exit(main())
