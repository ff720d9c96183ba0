"""Bisect for the density where mean optimum/n first exceeds eps.

    python3 scripts/threshold.py --n 1500 --seeds 10 --tol 0.02
"""

import argparse

from klsat.experiments import estimate_threshold
from klsat.pool import standard_pool


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=1500)
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--eps", type=float, default=0.01)
    ap.add_argument("--c-max", type=float, default=5.0)
    ap.add_argument("--tol", type=float, default=0.02)
    args = ap.parse_args()
    est = estimate_threshold(standard_pool(), args.n, args.seeds, args.eps, args.c_max, args.tol)
    print(f"bracket [{est.c_lo:.4f}, {est.c_hi:.4f}]  mean at ends {est.mean_lo:.4f} / {est.mean_hi:.4f}"
          + ("  (flagged)" if est.flagged else ""))


if __name__ == "__main__":
    main()
