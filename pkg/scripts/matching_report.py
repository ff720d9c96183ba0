"""LPM0 and Karp-Sipser fractions on G(n, cn) against both formula curves.

    python3 scripts/matching_report.py --n 3000 --seeds 20 --outdir results
"""

import argparse
from pathlib import Path

from klsat.config import ExperimentConfig, metadata_header
from klsat.experiments import matching_csv, matching_limit_report, svg_line_chart, tracking_note

GRID = (0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=3000)
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--b", type=int, default=1)
    ap.add_argument("--outdir", default="results")
    args = ap.parse_args()

    rows = matching_limit_report(GRID, args.n, args.seeds, args.b)
    note = tracking_note(rows)
    cfg = ExperimentConfig(n=args.n, seeds=args.seeds, b=args.b, c_grid=GRID)
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "matching_report.csv").write_text(matching_csv(rows, metadata_header(cfg, command="matching_report",
                                                                                tracking=note)))
    xs = [r.c for r in rows]
    (out / "matching_report.svg").write_text(svg_line_chart({
        "LPM0/n": (xs, [r.lpm0_frac for r in rows]),
        "Karp-Sipser/n": (xs, [r.ks_lower_frac for r in rows]),
        "formula (printed)": (xs, [r.ks_printed for r in rows]),
        "formula (degree normalized)": (xs, [r.ks_degnorm for r in rows]),
    }, title="matching fraction", xlabel="c (edges per node)", ylabel="fraction of n"))
    for r in rows:
        print(f"c={r.c:<5g} lpm0={r.lpm0_frac:.4f} ks={r.ks_lower_frac:.4f} "
              f"printed={r.ks_printed:.4f} degnorm={r.ks_degnorm:.4f}")
    print(note)


if __name__ == "__main__":
    main()
