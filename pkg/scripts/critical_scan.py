#!/usr/bin/env python3
"""Critical chemical potential scan over the interaction strength J.

Bisects mu_c for a range of J at fixed alpha and prints the phase boundary.

Usage: python3 scripts/critical_scan.py [--alpha 0.5] [--jvals 0.25 0.5 1 2 4]
       [--tol 1e-6]
"""

import argparse
import math
import sys

from hiercubes import Geometry
from hiercubes.analytics import critical_mu


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--alpha", type=float, default=0.5)
    ap.add_argument("--jvals", type=float, nargs="+",
                    default=[0.0, 0.25, 0.5, 1.0, 2.0, 4.0])
    ap.add_argument("--tol", type=float, default=1e-6)
    args = ap.parse_args()

    print(f"alpha = {args.alpha}, tol = {args.tol}")
    print(f"{'J':>8}  {'mu_c':>16}  {'gibbs at mu_c':>14}  {'evals':>6}")
    for J in args.jvals:
        res = critical_mu(J, args.alpha, args.tol, geometry=Geometry(1))
        mu = "+inf" if res["mu_c"] == math.inf else f"{res['mu_c']:.8f}"
        print(f"{J:8.3g}  {mu:>16}  {str(res['gibbs_at_mu_c']):>14}  "
              f"{len(res['trace']):6d}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
