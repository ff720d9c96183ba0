"""Constructive feasible solutions: propagation and depth-d local projection."""

from __future__ import annotations

import logging
from collections import deque
from typing import Optional

import numpy as np

from .instance import Instance, neighborhood
from .lp import Solution, glp_objective, solve_glp
from .pool import PoolError, check_condition_a

log = logging.getLogger(__name__)

PSI_POSITIVE = 1e-12


class ConditionAViolation(PoolError):
    def __init__(self, witness):
        r, k, z = witness
        super().__init__(f"Condition A fails: template {r}, coordinate {k}, value {z}")
        self.witness = witness


def propagate_assign(instance: Instance):
    """Set one variable at a time along a BFS of the constraint hypergraph.

    Roots (ascending index) take ``box_lo``.  When a constraint is first
    reached, its still-free variables take the endpoint minimizing their
    term (lower endpoint for a nonnegative coefficient).  Every slack is then
    the least one that satisfies its constraint.

    Returns ``(solution, positive_psi_count)``.
    """
    pool = instance.pool
    cond = check_condition_a(pool)
    if not cond.holds:
        raise ConditionAViolation(cond.witness)
    lo, hi = float(pool.box_lo), float(pool.box_hi)
    n = instance.n
    x = np.full(n, lo)
    assigned = np.zeros(n, dtype=bool)
    processed = np.zeros(instance.m, dtype=bool)
    inc = instance.incidence
    rows = instance.variables.tolist()
    coeffs = instance.coefficient_rows
    for root in range(n):
        if assigned[root]:
            continue
        assigned[root] = True
        x[root] = lo
        queue = deque([root])
        while queue:
            v = queue.popleft()
            for j in inc[v]:
                if processed[j]:
                    continue
                processed[j] = True
                free = {}
                for k, u in enumerate(rows[j]):
                    if not assigned[u]:
                        free[u] = free.get(u, 0.0) + coeffs[j, k]
                for u, a in free.items():
                    x[u] = lo if a >= 0 else hi
                    assigned[u] = True
                    queue.append(u)
    psi = instance.optimal_psi(x)
    sol = Solution(x, psi, glp_objective(instance, x, psi))
    return sol, int(np.count_nonzero(psi > PSI_POSITIVE))


def default_ball_cap(instance: Instance, d: int) -> int:
    return int(10 * (instance.c * instance.K) ** d + 50)


def ball_instance(instance: Instance, variables, constraints) -> Instance:
    """The sub-program on a ball, variables renumbered in ascending order."""
    local = {v: i for i, v in enumerate(variables)}
    cons = np.asarray(constraints, dtype=np.int64)
    if cons.size:
        mapped = np.vectorize(local.__getitem__, otypes=[np.int64])(instance.variables[cons])
    else:
        mapped = np.zeros((0, instance.K), dtype=np.int64)
    return Instance(instance.pool, len(variables), mapped, instance.templates[cons],
                    instance.weights[cons], seed=instance.seed, replacement=instance.replacement)


def local_project(instance: Instance, d: int, fallback: Optional[float] = None,
                  method: str = "highs", ball_cap: Optional[int] = None) -> Solution:
    """Give each variable the root value of its depth-``d`` ball's optimal sub-program.

    Balls that contain a cycle, or more than ``ball_cap`` constraints, get
    ``fallback`` (default ``box_lo``).  Slacks are set afterwards from the
    assembled ``x``.
    """
    pool = instance.pool
    lo, hi = float(pool.box_lo), float(pool.box_hi)
    if d < 1:
        raise ValueError("depth must be >= 1")
    fallback = lo if fallback is None else float(fallback)
    if not lo <= fallback <= hi:
        raise ValueError(f"fallback {fallback} outside the box")
    cap = default_ball_cap(instance, d) if ball_cap is None else ball_cap
    x = np.empty(instance.n)
    capped = 0
    for i in range(instance.n):
        ball = neighborhood(instance, i, d)
        if not ball.is_tree:
            x[i] = fallback
        elif len(ball.constraints) > cap:
            capped += 1
            x[i] = fallback
        elif not ball.constraints:
            # lone variable: minimize w_x * x over the box, w_x >= 0
            x[i] = lo
        else:
            sub = ball_instance(instance, ball.variables, ball.constraints)
            sol, _ = solve_glp(sub, method)
            x[i] = sol.x[ball.variables.index(i)]
    if capped:
        log.info("local_project: %d balls exceeded the cap of %d constraints", capped, cap)
    psi = instance.optimal_psi(x)
    return Solution(x, psi, glp_objective(instance, x, psi))
