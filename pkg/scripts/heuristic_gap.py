"""Local projection against the LP optimum at depths 1..3.

    python3 scripts/heuristic_gap.py --n 1000 --c 0.2 --seeds 20
"""

import argparse

import numpy as np

from klsat.heuristics import local_project, propagate_assign
from klsat.instance import generate_instance
from klsat.lp import solve_glp
from klsat.pool import standard_pool


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--c", type=float, default=0.2)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--depths", default="1,2,3")
    args = ap.parse_args()

    depths = [int(d) for d in args.depths.split(",")]
    pool = standard_pool()
    gaps = {d: [] for d in depths}
    prop = []
    for s in range(args.seeds):
        inst = generate_instance(pool, args.n, args.c, s)
        opt = solve_glp(inst)[0].objective
        prop.append(propagate_assign(inst)[0].objective - opt)
        for d in depths:
            gaps[d].append(local_project(inst, d).objective - opt)
    print(f"propagate_assign mean gap {np.mean(prop):.3f}")
    for d in depths:
        print(f"depth {d}: mean gap {np.mean(gaps[d]):.3f}  max {np.max(gaps[d]):.3f}")


if __name__ == "__main__":
    main()
