"""The thirteen acceptance checks, each at its stated size, seeds and tolerance.

Every check prints one ``[acceptance NN] PASS|FAIL ...`` line (shown even
without ``-s``).  Run just these with::

    pytest tests/test_acceptance.py -v
"""

import io
import time
from contextlib import redirect_stdout
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from klsat import experiments as ex
from klsat.cli import run_cli
from klsat.heuristics import local_project
from klsat.instance import cycle_census, generate_instance
from klsat.lp import brute_oracle_glp, oracle_lipschitz, solve_glp, verify_solution
from klsat.matching import (certify_bmatching, dual_as_glp, exact_bmatching_bruteforce, gen_graph,
                            karp_sipser, lpm0_dual, lpm0_primal)
from klsat.pool import WeightDistSpec, b_psi, standard_pool

from .strategies import random_small_instance

POOL_FILE = Path(__file__).resolve().parents[1] / "configs" / "standard.pool"


@pytest.fixture
def report(capsys):
    def emit(num, ok, detail, started):
        line = f"[acceptance {num:02d}] {'PASS' if ok else 'FAIL'} ({time.perf_counter() - started:.1f}s) {detail}"
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return emit


def small_graph(seed, max_n=14, max_edges=24, unit=False):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, max_n + 1))
    m = int(rng.integers(0, min(max_edges, n * (n - 1) // 2) + 1))
    dist = WeightDistSpec.constant(1) if unit else WeightDistSpec.uniform(0, 1)
    return gen_graph(n, Fraction(m, n), dist, seed)


def test_01_check_pool(report):
    t = time.perf_counter()
    out = io.StringIO()
    with redirect_stdout(out):
        rc_a = run_cli(["check-pool", "--pool", str(POOL_FILE)])
        rc_b = run_cli(["check-pool", "--pool", str(POOL_FILE), "--nu", "0.26"])
    lines = out.getvalue().splitlines()
    ok = (rc_a == rc_b == 0
          and lines[0] == "condition_a=true condition_b(l=2,nu=0.25)=true b_psi=1.75"
          and lines[1].startswith("condition_a=true condition_b(l=2,nu=0.26)=false")
          and time.perf_counter() - t < 1.0)
    report(1, ok, f"{lines[0]} | {lines[1]}", t)


def test_02_lp_matches_oracle(report):
    t = time.perf_counter()
    h = 1e-3
    bad, worst = [], 0.0
    for seed in range(200):
        inst = random_small_instance(seed, max_n=3, max_K=3)
        oracle = brute_oracle_glp(inst, h)
        got = solve_glp(inst)[0].objective
        worst = max(worst, abs(got - oracle))
        if abs(got - oracle) > oracle_lipschitz(inst) * h + 1e-7:
            bad.append(seed)
    report(2, not bad, f"200 instances, n<=3, K<=3; max |LP - oracle| = {worst:.2e}; mismatches {bad}", t)


def test_03_duality(report):
    t = time.perf_counter()
    bad, worst = [], 0.0
    for seed in range(100):
        g = gen_graph(60, 1.2, WeightDistSpec.uniform(0, 1), seed)
        for b in (1, 2):
            p, _ = lpm0_primal(g, b)
            d, _, _ = lpm0_dual(g, b)
            glp = solve_glp(dual_as_glp(g, b))[0].objective
            tol = 1e-7 * (1 + abs(p))
            err = max(abs(p - d), abs(glp - p))
            worst = max(worst, err)
            if err > tol:
                bad.append((seed, b))
    report(3, not bad, f"100 graphs x b in {{1,2}}; max discrepancy {worst:.2e}; failures {bad}", t)


def test_04_sandwich(report):
    t = time.perf_counter()
    bad, checks = [], 0
    for seed in range(200):
        g = small_graph(seed)
        for b in (1, 2):
            value, _ = exact_bmatching_bruteforce(g, b)
            for d in (3, 5):
                cert = certify_bmatching(g, b, d)
                checks += 1
                if not cert.lower - 1e-9 <= value <= cert.upper + 1e-9:
                    bad.append((seed, b, d))
    report(4, not bad, f"{checks} certificates on 200 graphs (n<=14, <=24 edges); violations {bad}", t)


def test_05_karp_sipser(report):
    t = time.perf_counter()
    bad, missing = [], []
    for seed in range(200):
        g = small_graph(seed, unit=True)
        res = karp_sipser(g)
        if res.exact_total is None:
            missing.append(seed)
        elif res.exact_total != exact_bmatching_bruteforce(g, 1)[1]:
            bad.append(seed)
    report(5, not bad and not missing, f"200 graphs; violations {bad}; no exact total {missing}", t)


def test_06_coupling(report):
    t = time.perf_counter()
    res = ex.coupling_monotone_test(standard_pool(), 300, 0.5, 1.0, 100)
    bad = [r.seed for r in res if not r.passed]
    margin = min(r.opt_c2 - r.opt_c1 for r in res)
    report(6, len(res) == 100 and not bad,
           f"100 nested pairs (n=300, c 0.5 -> 1.0); min opt(c2)-opt(c1) = {margin:.3g}; failures {bad}", t)


def test_07_bounded_differences(report):
    t = time.perf_counter()
    pool = standard_pool(WeightDistSpec.uniform(-0.25, 0.25))
    bound = float(pool.w_psi * b_psi(pool))
    bad, worst = [], 0.0
    for seed in range(100):
        inst = generate_instance(pool, 100, 1.5, seed)
        rng = np.random.default_rng(10_000 + seed)
        j = int(rng.integers(inst.m))
        other = inst.replace_constraint(j, int(rng.integers(len(pool.templates))),
                                        float(pool.weight_dist.sample(rng, 1)[0]),
                                        rng.integers(0, inst.n, size=pool.K))
        delta = abs(solve_glp(inst)[0].objective - solve_glp(other)[0].objective)
        worst = max(worst, delta)
        if delta > bound + 1e-9:
            bad.append(seed)
    report(7, not bad, f"100 perturbations (n=100, c=1.5); max |delta| = {worst:.4f} <= {bound}; violations {bad}", t)


def test_08_degree_law(report):
    t = time.perf_counter()
    st = ex.tree_stats(standard_pool(), 2000, 1.0, 1, 2000)
    report(8, st["tv_degree"] < 0.05, f"TV(root degree, Pois(3)) = {st['tv_degree']:.4f} < 0.05", t)


def test_09_cycle_bound(report):
    t = time.perf_counter()
    K, c = 3, 0.05
    totals = {2: 0, 3: 0, 4: 0}
    for seed in range(500):
        for r, v in cycle_census(generate_instance(standard_pool(), 300, c, seed), 4).items():
            totals[r] += v
    means = {r: v / 500 for r, v in totals.items()}
    limits = {r: 2 * (K * K * c) ** r for r in totals}
    ok = all(means[r] <= limits[r] for r in totals)
    detail = ", ".join(f"r={r}: {means[r]:.4f} <= {limits[r]:.4f}" for r in totals)
    report(9, ok, f"500 instances (n=300, c=0.05): {detail}", t)


def test_10_phase_transition_shape(report):
    t = time.perf_counter()
    grid = [0.05, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 50.0]
    recs = ex.scan_f(standard_pool(), grid, 1500, 20, record_runtime=False)
    lo, hi = recs[0], recs[-1]
    ok = lo.mean_scaled < 0.005 and hi.mean_scaled > 0.05 and ex.scan_is_monotone(recs)
    curve = " ".join(f"{r.c:g}:{r.mean_scaled:.4g}" for r in recs)
    report(10, ok, f"n=1500, 20 seeds; mean optimum/n by c: {curve}", t)


def test_11_concentration(report):
    t = time.perf_counter()
    rows = ex.concentration_report(standard_pool(), 1.0, [200, 800], 200)
    small, big = rows
    report(11, big.std_scaled < small.std_scaled,
           f"c=1, 200 seeds: std(200) = {small.std_scaled:.5f}, std(800) = {big.std_scaled:.5f}", t)


def test_12_local_projection(report):
    t = time.perf_counter()
    pool = standard_pool()
    gaps = {1: [], 3: []}
    dominated = True
    for seed in range(20):
        inst = generate_instance(pool, 1000, 0.2, seed)
        opt = solve_glp(inst)[0].objective
        for d in (1, 3):
            sol = local_project(inst, d)
            dominated &= verify_solution(inst, sol)["feasible"] and sol.objective >= opt - 1e-9
            gaps[d].append(sol.objective - opt)
    g1, g3 = float(np.mean(gaps[1])), float(np.mean(gaps[3]))
    report(12, dominated and g3 <= g1,
           f"n=1000, c=0.2, 20 seeds: dominance {'holds' if dominated else 'FAILS'}; "
           f"mean gap d=1 {g1:.3f}, d=3 {g3:.3f}", t)


def test_13_matching_limit(report):
    t = time.perf_counter()
    (row,) = ex.matching_limit_report([1.0], 3000, 20, b=1)
    gap = row.lpm0_frac - row.ks_lower_frac
    note = ex.tracking_note([row])
    ok = row.ks_lower_frac <= row.lpm0_frac + 1e-12 and gap < 0.08
    report(13, ok, f"c=1, n=3000, 20 seeds: LPM0/n = {row.lpm0_frac:.4f}, KS/n = {row.ks_lower_frac:.4f}, "
                   f"gap {gap:.4f}; printed {row.ks_printed:.4f}, degree-normalized {row.ks_degnorm:.4f}; "
                   f"{note}", t)
