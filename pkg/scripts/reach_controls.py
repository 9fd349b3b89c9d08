"""Federer estimates on the standard controls next to their known reach."""
import argparse
import time

from reachkit.fixtures import gen_controls
from reachkit.reach import federer_reach_estimate

CONTROLS = [
    ("circle", {"r": 1.0, "n": 2000}, 1.0),
    ("circle", {"r": 0.25, "n": 500}, 0.25),
    ("two_points", {"gap": 1.0}, 0.5),
    ("arc", {"n": 400}, 1.0),
    ("segment", {"n": 201}, float("inf")),
    ("square_boundary", {"side": 2.0, "n": 100}, float("inf")),
    ("filled_disk", {"r": 1.0, "pitch": 0.05}, float("inf")),
    ("parabola", {"a": 1.0, "x_max": 1.0, "n": 401}, 0.5),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    print(f"{'control':<16}{'params':<34}{'known':>10}{'estimate':>16}{'seconds':>9}")
    for name, params, known in CONTROLS:
        S = gen_controls(name, params)
        t0 = time.perf_counter()
        est = federer_reach_estimate(S, threads=args.threads).estimate
        dt = time.perf_counter() - t0
        print(f"{name:<16}{str(params):<34}{known:>10.4g}{est:>16.10g}{dt:>9.2f}")


if __name__ == "__main__":
    main()
