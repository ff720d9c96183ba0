"""Command-line entry point.

Exit status: 0 on success, 1 on usage, config or input errors, 2 when a
solver fails numerically.
"""

from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from pathlib import Path

from . import experiments as ex
from .config import ConfigError, ExperimentConfig, load_config, metadata_header
from .instance import format_instance, generate_instance, load_instance
from .lp import format_solution, solve_glp, verify_solution
from .matching import (certify_bmatching, format_graph, gen_graph, karp_sipser,
                       load_graph, lpm0_dual, lpm0_primal)
from .pool import PoolError, WeightDistSpec, b_psi, check_condition_a, check_condition_b, load_pool
from .simplex import LPError

log = logging.getLogger("klsat")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _floats(text):
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers: {text!r}")


def _ints(text):
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers: {text!r}")


def _global_flags(parser, suppress):
    # subcommand copies must not clobber values given before the subcommand
    kw = {"default": argparse.SUPPRESS if suppress else None}
    parser.add_argument("--seed", type=int, help="seed (base seed for batches)", **kw)
    parser.add_argument("--out", help="output file (default stdout)", **kw)
    parser.add_argument("--config", help="experiment config file", **kw)
    parser.add_argument("--workers", type=int, help="worker processes", **kw)
    parser.add_argument("-v", "--verbose", action="store_true", **kw)


def _run_flags(p, pool=True):
    if pool:
        p.add_argument("--pool", help="pool file")
    p.add_argument("--n", type=int)
    p.add_argument("--seeds", type=int)
    p.add_argument("--method", choices=("highs", "simplex"))
    p.add_argument("--no-replacement", dest="replacement", action="store_const", const=False, default=None)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    _global_flags(common, suppress=True)

    parser = _Parser(prog="klsat", description="Random linear constraint satisfaction experiments.")
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("gen", parents=[common], help="write a random instance or graph")
    p.add_argument("kind", choices=("instance", "graph"))
    p.add_argument("--pool")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--c", type=Fraction, required=True)
    p.add_argument("--weights", default="constant(1)", help="graph weight law, e.g. uniform(0,1)")
    p.add_argument("--no-replacement", dest="replacement", action="store_false")

    p = sub.add_parser("solve", parents=[common], help="solve an instance file")
    p.add_argument("--pool", required=True)
    p.add_argument("--instance", required=True)
    p.add_argument("--method", choices=("highs", "simplex"), default="highs")

    p = sub.add_parser("check-pool", parents=[common], help="check Conditions A and B and the slack bound")
    p.add_argument("--pool", required=True)
    p.add_argument("--l", type=int, default=2)
    p.add_argument("--nu", type=Fraction, default=Fraction(1, 4))

    p = sub.add_parser("scan", parents=[common], help="scaled optimum over a density grid")
    _run_flags(p)
    p.add_argument("--c", dest="c_grid", type=_floats)
    p.add_argument("--record-runtime", action="store_const", const=True, default=None)
    p.add_argument("--svg", help="also write an SVG chart here")

    p = sub.add_parser("threshold", parents=[common], help="bisect for the feasibility threshold")
    _run_flags(p)
    p.add_argument("--eps-feas", type=float)
    p.add_argument("--c-max", type=float)
    p.add_argument("--tol", type=float)

    p = sub.add_parser("concentrate", parents=[common], help="spread of optimum/n against n")
    _run_flags(p)
    p.add_argument("--c", type=float)
    p.add_argument("--n-list", type=_ints)

    p = sub.add_parser("couple", parents=[common], help="nested-instance monotonicity check")
    _run_flags(p)
    p.add_argument("--c1", type=float)
    p.add_argument("--c2", type=float)

    p = sub.add_parser("tree-stats", parents=[common], help="local tree diagnostics")
    _run_flags(p)
    p.add_argument("--c", type=float)
    p.add_argument("--d", type=int)
    p.add_argument("--samples", type=int)

    p = sub.add_parser("matching", parents=[common], help="b-matching tools on a graph file")
    p.add_argument("mode", choices=("primal", "dual", "certify", "ks"))
    p.add_argument("--graph")
    p.add_argument("--b", type=int, default=1)
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--method", choices=("highs", "simplex"), default="highs")
    # report mode over random graphs
    p.add_argument("--c", dest="c_grid", type=_floats)
    p.add_argument("--n", type=int)
    p.add_argument("--seeds", type=int)

    p = sub.add_parser("ks-curve", parents=[common], help="Karp-Sipser formula curves")
    p.add_argument("--c", dest="c_grid", type=_floats, required=True)
    p.add_argument("--svg")
    return parser


# ---------------------------------------------------------------- helpers

def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _experiment_config(args) -> ExperimentConfig:
    """Config file if given, then explicit flags on top."""
    over = {
        "pool_path": getattr(args, "pool", None),
        "n": getattr(args, "n", None),
        "seeds": getattr(args, "seeds", None),
        "base_seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", None),
        "replacement": getattr(args, "replacement", None),
        "record_runtime": getattr(args, "record_runtime", None),
        "method": getattr(args, "method", None),
        "c_grid": getattr(args, "c_grid", None),
        "eps_feas": getattr(args, "eps_feas", None),
        "tol": getattr(args, "tol", None),
        "c_max": getattr(args, "c_max", None),
        "c1": getattr(args, "c1", None),
        "c2": getattr(args, "c2", None),
        "n_list": getattr(args, "n_list", None),
        "d": getattr(args, "d", None),
        "samples": getattr(args, "samples", None),
    }
    if args.command in ("concentrate", "tree-stats"):
        over["c"] = getattr(args, "c", None)
    # keys a command never reads are filled so they are not demanded
    if args.command == "concentrate" and over["n"] is None and over["n_list"]:
        over["n"] = max(over["n_list"])
    if args.command == "tree-stats" and over["seeds"] is None:
        over["seeds"] = 1
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        cfg = load_config(cfg_path)
        pool_path = over["pool_path"] or cfg.pool_path
        if pool_path and over["pool_path"] is None and not Path(pool_path).is_absolute():
            # pool paths in a config file are relative to that file
            cand = Path(cfg_path).parent / pool_path
            if cand.exists():
                over["pool_path"] = str(cand)
        return cfg.with_overrides(**over)
    for key in ("n", "seeds"):
        if over[key] is None:
            raise ConfigError(f"missing required key: run.{key} (give --{key} or --config)")
    return ExperimentConfig(**{k: v for k, v in over.items() if v is not None})


def _pool(cfg: ExperimentConfig):
    return load_pool(cfg.require_pool())


# ---------------------------------------------------------------- commands

def cmd_gen(args):
    seed = args.seed or 0
    if args.kind == "instance":
        if not args.pool:
            raise UsageError("gen instance needs --pool")
        inst = generate_instance(load_pool(args.pool), args.n, args.c, seed, args.replacement)
        text = format_instance(inst)
    else:
        g = gen_graph(args.n, args.c, WeightDistSpec.from_string(args.weights), seed)
        text = format_graph(g)
    header = metadata_header(None, command=f"gen {args.kind}", n=args.n, c=args.c, seed=seed)
    _emit(header + text, args.out)


def cmd_solve(args):
    pool = load_pool(args.pool)
    inst = load_instance(args.instance, pool)
    sol, cert = solve_glp(inst, args.method)
    check = verify_solution(inst, sol)
    header = metadata_header(None, command="solve", instance=args.instance, method=args.method)
    summary = (f"# gap={cert.gap:.3e} cs_residual={cert.cs_residual:.3e} "
               f"max_violation={check['max_violation']:.3e}\n")
    if args.out:
        _emit(header + summary + format_solution(sol), args.out)
    print(f"objective={sol.objective!r} gap={cert.gap:.3e} feasible={str(check['feasible']).lower()}")


def cmd_check_pool(args):
    pool = load_pool(args.pool)
    a = check_condition_a(pool)
    b = check_condition_b(pool, args.l, args.nu)
    line = (f"condition_a={str(a.holds).lower()} "
            f"condition_b(l={args.l},nu={float(args.nu):g})={str(b.holds).lower()} "
            f"b_psi={float(b_psi(pool)):g}")
    print(line)
    if not a.holds:
        print(f"# condition_a witness (template, coordinate, value): {a.witness}")
    if not b.holds:
        print(f"# condition_b failing cube corner: {b.failing_cube}")
    if args.out:
        _emit(metadata_header(None, command="check-pool", pool=args.pool) + line + "\n", args.out)


def cmd_scan(args):
    cfg = _experiment_config(args)
    if not cfg.c_grid:
        raise ConfigError("missing required key: grid.c")
    recs = ex.scan_f(_pool(cfg), cfg.c_grid, cfg.n, cfg.seeds, cfg.base_seed, cfg.replacement,
                     cfg.method, cfg.workers, cfg.record_runtime)
    failures = sum(r.failures for r in recs)
    text = ex.scan_csv(recs, metadata_header(cfg, command="scan"))
    _emit(text, args.out)
    if failures:
        log.warning("%d failed solves excluded", failures)
    if getattr(args, "svg", None):
        Path(args.svg).write_text(ex.svg_line_chart(
            {"mean optimum/n": ([r.c for r in recs], [r.mean_scaled for r in recs])},
            title="scaled optimum", xlabel="c", ylabel="optimum / n"))


def cmd_threshold(args):
    cfg = _experiment_config(args)
    est = ex.estimate_threshold(_pool(cfg), cfg.n, cfg.seeds, cfg.eps_feas, cfg.c_max, cfg.tol,
                                cfg.base_seed, cfg.replacement, cfg.method, cfg.workers)
    rows = [(est.c_lo, est.c_hi, est.eps_feas, est.n, est.seeds, int(est.flagged), est.mean_lo, est.mean_hi)]
    _emit(ex.write_csv(("c_lo", "c_hi", "eps_feas", "n", "seeds", "flagged", "mean_lo", "mean_hi"), rows,
                       metadata_header(cfg, command="threshold")), args.out)


def cmd_concentrate(args):
    cfg = _experiment_config(args)
    if not cfg.n_list:
        raise ConfigError("missing required key: params.n_list")
    rows = ex.concentration_report(_pool(cfg), cfg.c, cfg.n_list, cfg.seeds, cfg.base_seed,
                                   cfg.replacement, cfg.method, cfg.workers)
    _emit(ex.write_csv(("n", "std_scaled", "mean_scaled", "flagged"),
                       [(r.n, r.std_scaled, r.mean_scaled, int(r.flagged)) for r in rows],
                       metadata_header(cfg, command="concentrate")), args.out)


def cmd_couple(args):
    cfg = _experiment_config(args)
    res = ex.coupling_monotone_test(_pool(cfg), cfg.n, cfg.c1, cfg.c2, cfg.seeds, cfg.base_seed,
                                    cfg.replacement, cfg.method, cfg.workers)
    _emit(ex.write_csv(("seed", "opt_c1", "opt_c2", "passed"),
                       [(r.seed, r.opt_c1, r.opt_c2, int(r.passed)) for r in res],
                       metadata_header(cfg, command="couple")), args.out)
    bad = [r.seed for r in res if not r.passed]
    if bad:
        log.error("coupling violated for seeds %s", bad)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_tree_stats(args):
    cfg = _experiment_config(args)
    st = ex.tree_stats(_pool(cfg), cfg.n, cfg.c, cfg.d, cfg.samples, cfg.base_seed, cfg.replacement)
    cols = tuple(st)
    _emit(ex.write_csv(cols, [tuple(st[k] for k in cols)], metadata_header(cfg, command="tree-stats")), args.out)


def cmd_matching(args):
    if args.graph is None:
        if args.mode != "ks":
            raise UsageError(f"matching {args.mode} needs --graph")
        # limit report over random unit-weight graphs
        if not args.c_grid or not args.n or not args.seeds:
            raise UsageError("matching without --graph needs --c, --n and --seeds")
        cfg = ExperimentConfig(n=args.n, seeds=args.seeds, base_seed=args.seed or 0, c_grid=args.c_grid,
                               b=args.b, workers=getattr(args, "workers", None) or 1, method=args.method)
        rows = ex.matching_limit_report(cfg.c_grid, cfg.n, cfg.seeds, cfg.b, cfg.base_seed, cfg.method,
                                        cfg.workers)
        note = ex.tracking_note(rows)
        _emit(ex.matching_csv(rows, metadata_header(cfg, command="matching", tracking=note)), args.out)
        return
    g = load_graph(args.graph)
    if args.mode == "primal":
        value, _ = lpm0_primal(g, args.b, args.method)
        print(f"lpm0_primal={value!r}")
    elif args.mode == "dual":
        value, _, _ = lpm0_dual(g, args.b, args.method)
        print(f"lpm0_dual={value!r}")
    elif args.mode == "certify":
        cert = certify_bmatching(g, args.b, args.d, args.method)
        print(f"lower={cert.lower!r} upper={cert.upper!r} lpm0={cert.lpm0!r} d={cert.d} "
              f"m_d={cert.m_d} w_max={cert.w_max!r}")
    else:
        res = karp_sipser(g)
        residual_nodes = len({v for i, j, _ in res.residual.edges for v in (i, j)})
        print(f"marked={len(res.marked_edges)} residual_nodes={residual_nodes} "
              f"residual_edges={res.residual.m} exact_total={res.exact_total}")


def cmd_ks_curve(args):
    rows = [(c, *ex._formula_curves(c)) for c in args.c_grid]
    _emit(ex.write_csv(("c", "ks_printed", "ks_degnorm"), rows,
                       metadata_header(None, command="ks-curve")), args.out)
    if args.svg:
        xs = [r[0] for r in rows]
        Path(args.svg).write_text(ex.svg_line_chart(
            {"printed": (xs, [r[1] for r in rows]), "degree_normalized": (xs, [r[2] for r in rows])},
            title="Karp-Sipser formula", xlabel="c", ylabel="matching fraction"))


COMMANDS = {
    "gen": cmd_gen, "solve": cmd_solve, "check-pool": cmd_check_pool, "scan": cmd_scan,
    "threshold": cmd_threshold, "concentrate": cmd_concentrate, "couple": cmd_couple,
    "tree-stats": cmd_tree_stats, "matching": cmd_matching, "ks-curve": cmd_ks_curve,
}


def run_cli(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        sys.stderr.write(str(exc))
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        code = COMMANDS[args.command](args)
    except UsageError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (ConfigError, PoolError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (LPError, ex.ScanError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    return EXIT_OK if code is None else code


def main():
    sys.exit(run_cli())
