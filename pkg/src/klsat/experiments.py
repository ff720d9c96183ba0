"""Batch drivers: f(c) scans, threshold bisection, coupling, concentration,
local tree diagnostics and the matching-limit comparison.

Every batch uses seeds ``base_seed + s`` for ``s = 0..seeds-1`` and folds the
results in that order, so the worker count never changes the numbers.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.stats import poisson

from .instance import generate_instance, neighborhood, stream_rng
from .lp import solve_glp
from .matching import gen_graph, karp_sipser, ks_limit, lpm0_primal
from .pool import Pool, WeightDistSpec
from .simplex import LPError

log = logging.getLogger(__name__)

FAILURE_BUDGET = 0.05
ROOT_STREAM = 3
TRACKING_TOL = 0.02

SCAN_COLUMNS = ("c", "n", "seeds", "mean_scaled", "std_scaled", "mean_runtime_s")
MATCHING_COLUMNS = ("c", "n", "lpm0_frac", "ks_lower_frac", "ks_printed", "ks_degnorm")


class ScanError(RuntimeError):
    pass


def _fan_out(fn: Callable, tasks: list, workers: int = 1) -> list:
    # executor.map yields in submission order, so the fold below is seed-ordered
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))


def _solve_one(task):
    pool, n, c, seed, replacement, method = task
    inst = generate_instance(pool, n, c, seed, replacement)
    t0 = time.perf_counter()
    try:
        sol, _ = solve_glp(inst, method)
    except LPError as exc:
        return None, time.perf_counter() - t0, f"seed {seed}: {exc}"
    return sol.objective, time.perf_counter() - t0, None


def solve_batch(pool: Pool, n: int, c, seeds: int, base_seed: int = 0, replacement: bool = True,
                method: str = "highs", workers: int = 1) -> list:
    """``(objective or None, runtime, error)`` per seed, in seed order."""
    tasks = [(pool, n, c, base_seed + s, replacement, method) for s in range(seeds)]
    return _fan_out(_solve_one, tasks, workers)


# ---------------------------------------------------------------- f(c) scan

@dataclass(frozen=True)
class ScanRecord:
    c: float
    n: int
    seeds: int
    mean_scaled: float
    std_scaled: float
    mean_runtime: float
    failures: int = 0


def _aggregate(c, n, results, record_runtime) -> ScanRecord:
    failed = [err for obj, _, err in results if obj is None]
    if failed and len(failed) >= FAILURE_BUDGET * len(results):
        raise ScanError(f"c={c}: {len(failed)} of {len(results)} solves failed; first: {failed[0]}")
    for err in failed:
        log.warning("excluded failed solve (%s)", err)
    scaled = np.array([obj / n for obj, _, _ in results if obj is not None])
    runtime = float(np.mean([t for _, t, _ in results])) if record_runtime else 0.0
    return ScanRecord(float(c), n, len(scaled), float(scaled.mean()), float(scaled.std()),
                      runtime, len(failed))


def scan_f(pool: Pool, c_grid: Sequence, n: int, seeds: int, base_seed: int = 0,
           replacement: bool = True, method: str = "highs", workers: int = 1,
           record_runtime: bool = True) -> list:
    """Mean and spread of optimum/n at each density.

    The same seeds are reused at every grid point, so by prefix consistency
    each instance is nested in its counterpart at the next density.
    ``record_runtime=False`` writes zero runtimes, which keeps reruns
    byte-identical.
    """
    c_grid = list(c_grid)
    if any(a > b for a, b in zip(c_grid, c_grid[1:])):
        raise ValueError("c grid must be sorted ascending")
    if seeds < 1:
        raise ValueError("seeds must be >= 1")
    out = []
    for c in c_grid:
        results = solve_batch(pool, n, c, seeds, base_seed, replacement, method, workers)
        out.append(_aggregate(c, n, results, record_runtime))
    return out


def scan_is_monotone(records: Sequence[ScanRecord], slack: float = 2.0) -> bool:
    """Non-decreasing within ``slack`` times the summed spread of neighbours."""
    return all(b.mean_scaled >= a.mean_scaled - slack * (a.std_scaled + b.std_scaled) - 1e-12
               for a, b in zip(records, records[1:]))


# ---------------------------------------------------------------- threshold

@dataclass(frozen=True)
class ThresholdEstimate:
    c_lo: float
    c_hi: float
    eps_feas: float
    n: int
    seeds: int
    flagged: bool = False
    mean_lo: float = 0.0
    mean_hi: float = 0.0
    widths: tuple = field(default=())


def estimate_threshold(pool: Pool, n: int, seeds: int, eps_feas: float = 0.01, c_max: float = 50.0,
                       tol: float = 0.01, base_seed: int = 0, replacement: bool = True,
                       method: str = "highs", workers: int = 1) -> ThresholdEstimate:
    """Bisect ``[0, c_max]`` on whether the mean scaled optimum exceeds ``eps_feas``.

    If it never does (checked at ``c_max``), the result is ``c_lo = c_hi = c_max``
    with ``flagged`` set.
    """
    if eps_feas <= 0:
        raise ValueError("eps_feas must be positive")
    if tol <= 0:
        raise ValueError("tol must be positive")

    def mean_at(c):
        res = solve_batch(pool, n, c, seeds, base_seed, replacement, method, workers)
        return _aggregate(c, n, res, False).mean_scaled

    top = mean_at(c_max)
    if top <= eps_feas:
        log.warning("mean scaled optimum %.4g never exceeds eps_feas=%g on [0, %g]", top, eps_feas, c_max)
        return ThresholdEstimate(c_max, c_max, eps_feas, n, seeds, True, top, top)
    lo, hi = 0.0, float(c_max)
    m_lo, m_hi = mean_at(lo), top
    if m_lo > eps_feas:
        return ThresholdEstimate(0.0, 0.0, eps_feas, n, seeds, True, m_lo, m_lo)
    widths = [hi - lo]
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        m = mean_at(mid)
        if m > eps_feas:
            hi, m_hi = mid, m
        else:
            lo, m_lo = mid, m
        widths.append(hi - lo)
    return ThresholdEstimate(lo, hi, eps_feas, n, seeds, False, m_lo, m_hi, tuple(widths))


# ---------------------------------------------------------------- coupling

@dataclass(frozen=True)
class CouplingResult:
    seed: int
    opt_c1: float
    opt_c2: float
    passed: bool


def _couple_one(task):
    pool, n, c1, c2, seed, replacement, method = task
    big = generate_instance(pool, n, c2, seed, replacement)
    small = generate_instance(pool, n, c1, seed, replacement)
    if big.prefix(small.m) != small:
        raise AssertionError(f"seed {seed}: the c1 instance is not a prefix of the c2 instance")
    o1 = solve_glp(small, method)[0].objective
    o2 = solve_glp(big, method)[0].objective
    return CouplingResult(seed, o1, o2, o2 >= o1 - 1e-9)


def coupling_monotone_test(pool: Pool, n: int, c1, c2, seeds: int, base_seed: int = 0,
                           replacement: bool = True, method: str = "highs", workers: int = 1) -> list:
    """Per seed: the denser instance extends the sparser one and costs at least as much."""
    if c1 > c2:
        raise ValueError("need c1 <= c2")
    tasks = [(pool, n, c1, c2, base_seed + s, replacement, method) for s in range(seeds)]
    return _fan_out(_couple_one, tasks, workers)


# ---------------------------------------------------------------- concentration

@dataclass(frozen=True)
class ConcentrationRow:
    n: int
    std_scaled: float
    mean_scaled: float
    flagged: bool


def concentration_report(pool: Pool, c, n_list: Sequence, seeds: int, base_seed: int = 0,
                         replacement: bool = True, method: str = "highs", workers: int = 1) -> list:
    """Spread of optimum/n per size.  A single seed gives std 0 and is flagged."""
    n_list = list(n_list)
    if any(a > b for a, b in zip(n_list, n_list[1:])):
        raise ValueError("n_list must be ascending")
    rows = []
    for n in n_list:
        rec = _aggregate(c, n, solve_batch(pool, n, c, seeds, base_seed, replacement, method, workers), False)
        rows.append(ConcentrationRow(n, rec.std_scaled, rec.mean_scaled, seeds < 2))
    return rows


# ---------------------------------------------------------------- local trees

def total_variation(counts: dict, pmf: Callable[[int], float], tail: Callable[[int], float]) -> float:
    """TV between an empirical histogram on 0..kmax and a law on the nonnegative integers."""
    total = sum(counts.values())
    if total == 0:
        return 0.0
    kmax = max(counts)
    tv = sum(abs(counts.get(k, 0) / total - pmf(k)) for k in range(kmax + 1))
    return 0.5 * (tv + tail(kmax))


def poisson_tv(counts: dict, lam: float) -> float:
    if lam == 0:
        return 0.5 * (abs(counts.get(0, 0) / sum(counts.values()) - 1.0)
                      + sum(v for k, v in counts.items() if k) / sum(counts.values()))
    return total_variation(counts, lambda k: float(poisson.pmf(k, lam)), lambda k: float(poisson.sf(k, lam)))


def galton_watson_constraint_counts(c, K: int, d: int, samples: int, rng: np.random.Generator,
                                    cap: int = 100_000) -> np.ndarray:
    """Constraints met within ``d`` generations of a Pois(cK) branching tree.

    Each variable spawns Pois(cK) constraints and each constraint spawns
    ``K - 1`` fresh variables.  Counts are truncated at ``cap``.
    """
    lam = c * K
    out = np.zeros(samples, dtype=np.int64)
    for s in range(samples):
        frontier, total = 1, 0
        for _ in range(d):
            if frontier == 0 or total > cap:
                break
            kids = int(rng.poisson(lam, frontier).sum()) if frontier < 10_000 else int(rng.poisson(lam * frontier))
            total += kids
            frontier = kids * (K - 1)
        out[s] = min(total, cap)
    return out


def _hist(values) -> dict:
    h = {}
    for v in values:
        h[int(v)] = h.get(int(v), 0) + 1
    return h


def _empirical_tv(a: dict, b: dict) -> float:
    na, nb = sum(a.values()), sum(b.values())
    keys = set(a) | set(b)
    return 0.5 * sum(abs(a.get(k, 0) / na - b.get(k, 0) / nb) for k in keys)


def tree_stats(pool: Pool, n: int, c, d: int, samples: int, base_seed: int = 0,
               replacement: bool = True) -> dict:
    """Local structure of random balls against the Pois(cK) branching tree.

    One fresh instance per sample with a uniform root.  ``tv_degree`` compares
    the root's constraint count with Pois(cK); ``tv_depth`` compares the
    ball's constraint count with a simulated branching tree of depth ``d``.
    """
    if d < 1:
        raise ValueError("depth must be >= 1")
    degrees, ball_sizes, trees = [], [], 0
    for s in range(samples):
        seed = base_seed + s
        inst = generate_instance(pool, n, c, seed, replacement)
        root = int(stream_rng(seed, ROOT_STREAM).integers(n))
        degrees.append(len(inst.incidence[root]))
        ball = neighborhood(inst, root, d)
        trees += ball.is_tree
        ball_sizes.append(len(ball.constraints))
    gw = galton_watson_constraint_counts(c, pool.K, d, samples, stream_rng(base_seed, ROOT_STREAM + 1))
    return {
        "tv_degree": poisson_tv(_hist(degrees), c * pool.K),
        "tree_fraction": trees / samples,
        "gw_tree_fraction": 1.0,
        "tv_depth": _empirical_tv(_hist(ball_sizes), _hist(gw)),
        "mean_ball_constraints": float(np.mean(ball_sizes)),
        "mean_gw_constraints": float(np.mean(gw)),
    }


# ---------------------------------------------------------------- matching limit

@dataclass(frozen=True)
class MatchingRow:
    c: float
    n: int
    lpm0_frac: float
    ks_lower_frac: float
    ks_printed: float
    ks_degnorm: float


def _match_one(task):
    n, c, seed, b, method = task
    g = gen_graph(n, c, WeightDistSpec.constant(1), seed)
    value, _ = lpm0_primal(g, b, method) if g.m else (0.0, None)
    return value / n, len(karp_sipser(g).marked_edges) / n


def matching_limit_report(c_grid: Sequence, n: int, seeds: int, b: int = 1, base_seed: int = 0,
                          method: str = "highs", workers: int = 1) -> list:
    """Per density: mean LPM0/n, mean Karp-Sipser marked/n, and both formula curves."""
    rows = []
    for c in c_grid:
        tasks = [(n, c, base_seed + s, b, method) for s in range(seeds)]
        res = _fan_out(_match_one, tasks, workers)
        rows.append(MatchingRow(float(c), n, float(np.mean([r[0] for r in res])),
                                float(np.mean([r[1] for r in res])),
                                *_formula_curves(c)))
    return rows


def _formula_curves(c) -> tuple:
    # the formulas need c > 0; at c = 0 report their limits as c -> 0+
    if c == 0:
        return 1.0, 0.0
    return ks_limit(c, "printed"), ks_limit(c, "degree_normalized")


def tracking_note(rows: Sequence[MatchingRow], tol: float = TRACKING_TOL) -> str:
    """Which formula curve, if either, the empirical fractions follow.

    A graph with ``cn`` edges has mean degree ``2c``; the degree-normalized
    formula at ``2c`` is checked as well.
    """
    if not rows:
        return "no rows"
    pos = [r for r in rows if r.c > 0]
    if not pos:
        return "only c=0 rows"

    def err(curve):
        return max(abs(curve(r) - r.lpm0_frac) for r in pos)

    curves = {
        "printed(c)": lambda r: r.ks_printed,
        "degree_normalized(c)": lambda r: r.ks_degnorm,
        "degree_normalized(2c)": lambda r: ks_limit(2 * r.c, "degree_normalized"),
    }
    errs = {name: err(f) for name, f in curves.items()}
    parts = [f"{name} max|diff|={e:.4f}" for name, e in errs.items()]
    best = min(errs, key=errs.get)
    verdict = f"tracks {best}" if errs[best] <= tol else "tracks neither"
    return f"{verdict} (tol {tol}); " + "; ".join(parts)


# ---------------------------------------------------------------- output

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)


def write_csv(columns: Sequence[str], rows: Sequence[Sequence], header: str = "") -> str:
    buf = io.StringIO()
    buf.write(header)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def scan_csv(records: Sequence[ScanRecord], header: str = "") -> str:
    return write_csv(SCAN_COLUMNS, [(r.c, r.n, r.seeds, r.mean_scaled, r.std_scaled, r.mean_runtime)
                                    for r in records], header)


def matching_csv(rows: Sequence[MatchingRow], header: str = "") -> str:
    return write_csv(MATCHING_COLUMNS, [(r.c, r.n, r.lpm0_frac, r.ks_lower_frac, r.ks_printed, r.ks_degnorm)
                                        for r in rows], header)


def read_csv(text: str) -> list:
    """Rows of a CSV written above, comment lines skipped, values as floats."""
    lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
    reader = csv.DictReader(lines)
    return [{k: float(v) for k, v in row.items()} for row in reader]


def svg_line_chart(series: dict, title: str = "", xlabel: str = "", ylabel: str = "",
                   width: int = 640, height: int = 400) -> str:
    """Standalone SVG with one polyline per ``name -> (xs, ys)``."""
    pad = 50
    colors = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf")
    pts = [(x, y) for xs, ys in series.values() for x, y in zip(xs, ys) if math.isfinite(y)]
    if not pts:
        pts = [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in pts), max(p[0] for p in pts)
    y0, y1 = min(p[1] for p in pts), max(p[1] for p in pts)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y1 = y0 + 1

    def sx(x):
        return pad + (x - x0) / (x1 - x0) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y0) / (y1 - y0) * (height - 2 * pad)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" y2="{height - pad}" stroke="black"/>',
           f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" stroke="black"/>',
           f'<text x="{width / 2}" y="{pad / 2}" text-anchor="middle" font-size="14">{title}</text>',
           f'<text x="{width / 2}" y="{height - 10}" text-anchor="middle" font-size="12">{xlabel}</text>',
           f'<text x="15" y="{height / 2}" text-anchor="middle" font-size="12" '
           f'transform="rotate(-90 15 {height / 2})">{ylabel}</text>',
           f'<text x="{pad}" y="{height - pad + 15}" font-size="10" text-anchor="middle">{x0:.3g}</text>',
           f'<text x="{width - pad}" y="{height - pad + 15}" font-size="10" text-anchor="middle">{x1:.3g}</text>',
           f'<text x="{pad - 5}" y="{height - pad}" font-size="10" text-anchor="end">{y0:.3g}</text>',
           f'<text x="{pad - 5}" y="{pad + 4}" font-size="10" text-anchor="end">{y1:.3g}</text>']
    for k, (name, (xs, ys)) in enumerate(series.items()):
        color = colors[k % len(colors)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys) if math.isfinite(y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        out.append(f'<text x="{width - pad - 5}" y="{pad + 15 * (k + 1)}" font-size="11" '
                   f'text-anchor="end" fill="{color}">{name}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
