"""How the smycka certificate behaves as the sample is refined.

The curve's two ends approach each other to within 6 exp(-9) ~ 7.4e-4, and that
gap, not the sample pitch, bounds the modulus delta(1/(2L)) from below.
"""
import argparse
import math

from reachkit.curves import curve_reach_bound, quasi_arc_check
from reachkit.fixtures import gen_smycka
from reachkit.reach import federer_reach_estimate


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--T", type=float, default=3.0)
    ap.add_argument("--n", type=int, nargs="+", default=[1001, 2001, 4001, 8001])
    args = ap.parse_args()
    gap = 2 * args.T * math.exp(-args.T ** 2)
    print(f"t in [-{args.T}, {args.T}]; end-to-end gap {gap:.4e}")
    print(f"{'n':>6}{'pitch':>11}{'L_hat':>9}{'delta':>12}{'rho_bound':>12}{'federer':>12}{'quasi-arc':>10}")
    for n in args.n:
        curve, S = gen_smycka((-args.T, args.T), n)
        cert = curve_reach_bound(curve, check=False)
        qa = quasi_arc_check(curve, [0.5])
        est = federer_reach_estimate(S).estimate
        print(f"{n:>6}{curve.pitch:>11.3e}{cert.L_hat:>9.4f}{cert.delta:>12.4e}{cert.rho_bound:>12.4e}"
              f"{est:>12.4e}{str(qa.passed):>10}")


if __name__ == "__main__":
    main()
