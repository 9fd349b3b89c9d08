"""Verdict rates of the planar classifier on random boundary samples of A_K.

Away from K every boundary sample lies on a smooth arc of +-dist(x, K)^2 and should
come out T1; samples at K points are T2 (interior K) or T3 (ends of conv K).
"""
import argparse
from collections import Counter

import numpy as np

from reachkit.fixtures import gen_ak
from reachkit.planar import classify_point


def expected(p, K, tol=1e-12):
    if abs(p[1]) <= tol and np.min(np.abs(np.asarray(K) - p[0])) <= tol:
        return "T3" if p[0] in (K[0], K[-1]) else "T2"
    return "T1"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--K", type=float, nargs="+", default=[0.0, 1.0, 2.0])
    ap.add_argument("--n", type=int, default=2000)
    ap.add_argument("--samples", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    K = sorted(args.K)
    S = gen_ak(K, args.n)
    bd = np.flatnonzero([not c.full_space for c in S.tangent_cones])
    pick = np.random.default_rng(args.seed).choice(bd, min(args.samples, len(bd)), replace=False)
    tally, wrong = Counter(), []
    for i in np.sort(pick):
        p = S.points[i]
        got = classify_point(S, int(i)).verdict
        tally[got] += 1
        if got not in ("Inconclusive", expected(p, K)):
            wrong.append((p.tolist(), got))
    print(f"A_K with K = {K}, n = {args.n}, {S.n} samples, r0 = {S.meta['r0']:.6g}")
    for verdict, count in sorted(tally.items()):
        print(f"  {verdict:<13}{count:>5}  ({100 * count / len(pick):.1f}%)")
    print(f"  misclassified {len(wrong)}")
    for p, got in wrong:
        print(f"    {p} -> {got}")


if __name__ == "__main__":
    main()
