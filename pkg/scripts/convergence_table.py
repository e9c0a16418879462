#!/usr/bin/env python3
"""Print residuals and fitted orders for every fixture over an eps grid.

    python3 scripts/convergence_table.py
    python3 scripts/convergence_table.py --eps 0.1,0.05,0.025,0.0125,0.00625 --fixtures FIX-NL
"""

import argparse
import math

from nonlocal_layers.fixtures import FIXTURE_NAMES
from nonlocal_layers.verification import DEFAULT_EPS, CheckSpec, FixtureRun, run_check

ORDER_CHECKS = ("leading_order", "refined_interior", "B_first_order", "B_second_order", "boundary_dnu")


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--eps", type=lambda s: tuple(float(x) for x in s.split(",")), default=DEFAULT_EPS)
    ap.add_argument("--fixtures", nargs="+", default=list(FIXTURE_NAMES))
    args = ap.parse_args()
    eps = sorted(args.eps, reverse=True)
    for name in args.fixtures:
        run = FixtureRun.from_fixture(name)
        run.solve_all(eps)
        print(f"\n{name}")
        print(f"  {'eps':>10} {'theta/eps':>10} {'B_eps':>14}")
        for e in eps:
            sol = run.solution(e)
            print(f"  {e:>10g} {sol.theta_of_eps / e:>10.6f} {sol.B_eps:>14.10f}")
        print(f"  {'check':<18}" + "".join(f"{e:>11g}" for e in eps) + f"{'order':>9}")
        for check in ORDER_CHECKS:
            r = run_check(CheckSpec(check, name, tuple(eps)), run)
            vals = r.residuals.get(check, [])
            order = r.fitted_order
            o = "exact" if order is not None and math.isinf(order) else f"{order:.3f}"
            flag = "" if r.passed else "  FAIL"
            print(f"  {check:<18}" + "".join(f"{v:>11.3e}" for v in vals) + f"{o:>9}{flag}")


if __name__ == "__main__":
    main()
