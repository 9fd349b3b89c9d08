"""Singular cells of ||x||_inf on [-1, 1]^2 across eps, with the Z-inclusion check."""
import argparse

import numpy as np

from reachkit.convex import linf_norm_2d, sigma_k_eps, zwit_inclusion_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--eps", type=float, nargs="+", default=[0.3, 0.5, 0.7, 0.71, 1.0, 1.2])
    ap.add_argument("--grid", type=int, default=101)
    args = ap.parse_args()
    f = linf_norm_2d()
    for eps in args.eps:
        for k in (1, 2):
            rep = sigma_k_eps(f, k, eps)
            kinds = ", ".join(f"{c.kind}@{np.round(np.mean(c.geometry, axis=0), 3).tolist()}"
                              for c in rep.cells) or "-"
            z = zwit_inclusion_check(f, k, eps, grid_n=args.grid)
            print(f"eps {eps:<5} k {k}: {rep.count} cells [{kinds}]; "
                  f"Z members {z.z_members}, inclusion {'ok' if z.passed else 'FAILED'}")


if __name__ == "__main__":
    main()
