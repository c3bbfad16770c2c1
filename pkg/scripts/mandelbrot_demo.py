#!/usr/bin/env python3
"""Fractal-percolation demonstration: no activity generates the measure.

For retention probability p, enumerates the truncated percolation law and
reports the GNZ balance residual at the top block against the natural fit
z = p/(1-p), per depth.  The residual grows toward p, showing the measure is
not Gibbs for any activity.

Exhaustive verification is exponential in depth (the depth-3 support already
has 677 configurations; depth 4 has 458 330), so the default stops at 3.

Usage: python3 scripts/mandelbrot_demo.py [--p 0.5] [--max-depth 3]
"""

import argparse
import sys

from hiercubes import Geometry, block
from hiercubes.oracle import mandelbrot_gnz_report


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--p", type=float, default=0.5)
    ap.add_argument("--max-depth", type=int, default=3)
    args = ap.parse_args()

    geo = Geometry(1)
    w = block(0, 0)
    print(f"p = {args.p}   fit z = p/(1-p) = {args.p / (1 - args.p):.6g}")
    print(f"{'depth':>5}  {'top-block residual':>20}  {'gap to p':>12}")
    for n in range(1, args.max_depth + 1):
        rep = mandelbrot_gnz_report(args.p, geo, w, n)
        r = rep["top_block_residual"]
        print(f"{n:5d}  {r:20.12f}  {args.p - r:12.3e}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
