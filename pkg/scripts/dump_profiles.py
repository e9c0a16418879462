#!/usr/bin/env python3
"""Write W, Phi, Psi of a problem file on a uniform t grid as plot-ready CSV."""

import argparse
import csv

import numpy as np

from nonlocal_layers.cli import parse_config
from nonlocal_layers.profiles import build_profiles


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("problem")
    ap.add_argument("--t-max", type=float, default=10.0)
    ap.add_argument("--n", type=int, default=401)
    ap.add_argument("--out", default="profiles_uniform.csv")
    args = ap.parse_args()
    p, _ = parse_config(args.problem)
    prof = build_profiles(p)
    t = np.linspace(0.0, args.t_max, args.n)
    cols = ("W", "Phi", "Psi")
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("t",) + cols)
        for i, ti in enumerate(t):
            w.writerow([repr(float(ti))] + [repr(float(prof(c, t)[i])) for c in cols])
    print(f"b_star = {prof.b_star:.15g}, wrote {args.n} rows to {args.out}")


if __name__ == "__main__":
    main()
