"""Exact LP solves of the generalized program, with duality certificates.

Two backends share one array-level entry point:

* ``"highs"`` (default): scipy's HiGHS interface, used for anything large.
* ``"simplex"``: the dense bounded-variable simplex in :mod:`klsat.simplex`,
  for small programs and as a cross-check.

Whichever backend runs, the certificate is rebuilt here from the row duals
alone: reduced costs ``c - A^T y`` are split onto the finite bounds, which
makes the dual objective a valid bound regardless of solver tolerances.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .instance import Instance
from .simplex import InfeasibleError, LPError, NumericalFailure, UnboundedError, simplex_solve

__all__ = [
    "Solution", "DualCertificate", "LinearProgram", "LPError", "InfeasibleError",
    "UnboundedError", "NumericalFailure", "solve_lp", "solve_lp_generic", "solve_glp",
    "glp_program", "brute_oracle_glp", "vertex_oracle_glp", "oracle_lipschitz",
    "verify_solution", "format_solution", "parse_solution", "save_solution", "glp_objective",
]

HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": 1e-9,
    "dual_feasibility_tolerance": 1e-9,
}
# HiGHS dual simplex stalls on the larger degenerate programs; its interior
# point method with crossover returns a vertex just as deterministically.
IPM_ROW_THRESHOLD = 1000
# reduced costs this small on an infinite bound are solver noise, not a ray
DUAL_NOISE = 1e-9


@dataclass(frozen=True)
class Solution:
    x: np.ndarray
    psi: np.ndarray
    objective: float
    status: str = "optimal"


@dataclass(frozen=True)
class DualCertificate:
    row_duals: np.ndarray
    lower_duals: np.ndarray
    upper_duals: np.ndarray
    dual_objective: float
    gap: float
    cs_residual: float


@dataclass
class LinearProgram:
    """``min/max c.x`` subject to ``A x (senses) b`` and ``lo <= x <= hi``."""

    c: np.ndarray
    A: sp.csr_matrix
    senses: np.ndarray
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    direction: str = "min"

    def __post_init__(self):
        self.c = np.asarray(self.c, float)
        self.A = sp.csr_matrix(self.A, shape=(len(self.b), len(self.c)))
        self.senses = np.asarray(self.senses, dtype="<U2")
        self.b = np.asarray(self.b, float)
        self.lo = np.asarray(self.lo, float)
        self.hi = np.asarray(self.hi, float)
        if self.direction not in ("min", "max"):
            raise ValueError(f"direction must be 'min' or 'max', got {self.direction!r}")
        bad = set(self.senses.tolist()) - {"<=", ">=", "="}
        if bad:
            raise ValueError(f"unknown row senses {sorted(bad)}")
        for name in ("c", "b"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"non-finite entries in {name}")


def _solve_highs(c, lp: LinearProgram):
    le, ge, eq = (lp.senses == "<="), (lp.senses == ">="), (lp.senses == "=")
    ub_rows = np.flatnonzero(le | ge)
    sign = np.where(ge[ub_rows], -1.0, 1.0)
    A_ub = sp.diags(sign) @ lp.A[ub_rows] if ub_rows.size else None
    b_ub = sign * lp.b[ub_rows] if ub_rows.size else None
    eq_rows = np.flatnonzero(eq)
    A_eq = lp.A[eq_rows] if eq_rows.size else None
    b_eq = lp.b[eq_rows] if eq_rows.size else None
    bounds = np.column_stack([lp.lo, lp.hi])
    algo = "highs-ipm" if len(lp.b) >= IPM_ROW_THRESHOLD else "highs-ds"
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=bounds,
                  method=algo, options=HIGHS_OPTIONS)
    if res.status == 2:
        raise InfeasibleError(res.message)
    if res.status == 3:
        raise UnboundedError(res.message)
    if res.status != 0:
        raise NumericalFailure(res.message)
    y = np.zeros(len(lp.b))
    if ub_rows.size:
        y[ub_rows] = sign * res.ineqlin.marginals
    if eq_rows.size:
        y[eq_rows] = res.eqlin.marginals
    return np.asarray(res.x, float), y


def _certificate(c, lp: LinearProgram, x, y) -> DualCertificate:
    """Certificate for ``min c.x``: project ``y`` onto its sign cone, push the rest to bounds."""
    y = y.copy()
    y[lp.senses == "<="] = np.minimum(y[lp.senses == "<="], 0.0)
    y[lp.senses == ">="] = np.maximum(y[lp.senses == ">="], 0.0)
    d = c - lp.A.T @ y
    noise = DUAL_NOISE * (1.0 + np.abs(c))
    lam = np.maximum(d, 0.0)
    mu = np.maximum(-d, 0.0)
    lam[np.isinf(lp.lo) & (lam <= noise)] = 0.0
    mu[np.isinf(lp.hi) & (mu <= noise)] = 0.0
    with np.errstate(invalid="ignore", over="ignore"):
        lower_part = np.where(lam > 0, lam * lp.lo, 0.0)
        upper_part = np.where(mu > 0, mu * lp.hi, 0.0)
        dual = float(lp.b @ y + lower_part.sum() - upper_part.sum())
        if not math.isfinite(dual):
            dual = -math.inf
        primal = float(c @ x)
        slack = lp.b - lp.A @ x
        cs = np.concatenate([
            np.abs(y * slack),
            np.where(lam > 0, lam * np.abs(x - lp.lo), 0.0),
            np.where(mu > 0, mu * np.abs(lp.hi - x), 0.0),
        ])
    return DualCertificate(y, lam, -mu, dual, primal - dual, float(cs.max(initial=0.0)))


def _solve_raw(lp: LinearProgram, method: str):
    """Solve in minimization form; returns ``(c_min, x, y)``."""
    c = -lp.c if lp.direction == "max" else lp.c
    if method == "highs":
        x, y = _solve_highs(c, lp)
    elif method == "simplex":
        x, y = simplex_solve(c, lp.A.toarray(), lp.senses, lp.b, lp.lo, lp.hi)
    else:
        raise ValueError(f"unknown LP method {method!r}")
    return c, np.clip(x, lp.lo, lp.hi), y


def solve_lp(lp: LinearProgram, method: str = "highs"):
    """Solve an array-form program; returns ``(x, objective, certificate)``."""
    c, x, y = _solve_raw(lp, method)
    cert = _certificate(c, lp, x, y)
    if lp.direction == "max":
        cert = DualCertificate(-cert.row_duals, -cert.lower_duals, -cert.upper_duals,
                               -cert.dual_objective, cert.gap, cert.cs_residual)
    return x, float(lp.c @ x), cert


def solve_lp_generic(rows: Sequence, bounds: Sequence, objective: dict,
                     direction: str = "min", method: str = "highs"):
    """Solve an LP given as ``rows = [(coeffs, sense, rhs), ...]``.

    ``coeffs`` and ``objective`` map variable index -> coefficient; variables
    are ``0..len(bounds)-1`` with ``bounds[i] = (lo, hi)``.
    """
    nvar = len(bounds)
    data, ri, ci, senses, rhs = [], [], [], [], []
    for r, (coeffs, sense, b) in enumerate(rows):
        for v, a in coeffs.items():
            if not 0 <= v < nvar:
                raise ValueError(f"row {r} references unknown variable {v}")
            ri.append(r)
            ci.append(v)
            data.append(float(a))
        senses.append(sense)
        rhs.append(float(b))
    c = np.zeros(nvar)
    for v, a in objective.items():
        c[v] = float(a)
    A = sp.csr_matrix((data, (ri, ci)), shape=(len(rows), nvar))
    lo = np.array([float(b[0]) for b in bounds])
    hi = np.array([float(b[1]) for b in bounds])
    lp = LinearProgram(c, A, senses, rhs, lo, hi, direction)
    x, obj, cert = solve_lp(lp, method)
    return Solution(x, np.zeros(0), obj), cert


# ---------------------------------------------------------------- GLP

def glp_program(instance: Instance) -> LinearProgram:
    """Variables ``x_0..x_{n-1}, psi_0..psi_{m-1}``; row j: ``a.x - psi_j <= b_r + W_j``."""
    n, m, K = instance.n, instance.m, instance.K
    pool = instance.pool
    rows = np.repeat(np.arange(m), K)
    cols = instance.variables.ravel()
    vals = instance.coefficient_rows.ravel()
    A = sp.csr_matrix(
        (np.concatenate([vals, -np.ones(m)]),
         (np.concatenate([rows, np.arange(m)]), np.concatenate([cols, n + np.arange(m)]))),
        shape=(m, n + m),
    )
    A.sum_duplicates()
    c = np.concatenate([np.full(n, float(pool.w_x)), np.full(m, float(pool.w_psi))])
    lo = np.concatenate([np.full(n, float(pool.box_lo)), np.zeros(m)])
    hi = np.concatenate([np.full(n, float(pool.box_hi)), np.full(m, np.inf)])
    return LinearProgram(c, A, np.full(m, "<="), instance.rhs, lo, hi, "min")


def glp_objective(instance: Instance, x, psi) -> float:
    pool = instance.pool
    return float(pool.w_x) * math.fsum(x) + float(pool.w_psi) * math.fsum(psi)


def solve_glp(instance: Instance, method: str = "highs"):
    """Global optimum of the generalized program.

    The returned ``psi`` is re-derived from the solver's ``x`` as
    ``max(0, a.x - b - W)`` and the certificate is built for that point.
    """
    lp = glp_program(instance)
    c, z, y = _solve_raw(lp, method)
    n = instance.n
    x = np.clip(z[:n], float(instance.pool.box_lo), float(instance.pool.box_hi))
    psi = instance.optimal_psi(x)
    cert = _certificate(c, lp, np.concatenate([x, psi]), y)
    return Solution(x, psi, glp_objective(instance, x, psi)), cert


def verify_solution(instance: Instance, solution: Solution) -> dict:
    """Recompute residuals and the objective without touching solver output."""
    x = np.asarray(solution.x, float)
    psi = np.asarray(solution.psi, float)
    if x.shape != (instance.n,) or psi.shape != (instance.m,):
        raise ValueError(f"solution shape {x.shape}/{psi.shape} does not match "
                         f"instance n={instance.n}, m={instance.m}")
    pool = instance.pool
    lo, hi = float(pool.box_lo), float(pool.box_hi)
    viol = [0.0]
    if x.size:
        viol.append(float(np.max(np.maximum(lo - x, x - hi))))
    if psi.size:
        viol.append(float(np.max(-psi)))
        coeffs = pool.coefficient_matrix()
        rhs = pool.rhs_vector()
        worst = 0.0
        for j, (row, r, w) in enumerate(zip(instance.variables.tolist(),
                                            instance.templates.tolist(),
                                            instance.weights.tolist())):
            lhs = math.fsum(coeffs[r, k] * x[v] for k, v in enumerate(row))
            worst = max(worst, lhs - rhs[r] - w - psi[j])
        viol.append(worst)
    max_violation = max(viol)
    return {
        "feasible": max_violation <= 1e-9,
        "max_violation": max_violation,
        "objective_recomputed": glp_objective(instance, x, psi),
    }


# ---------------------------------------------------------------- oracle

def oracle_lipschitz(instance: Instance) -> float:
    """``w_x n + w_psi sum_j sum_k |a_{r_j k}|``: an l_inf Lipschitz bound of the reduced objective."""
    pool = instance.pool
    return float(pool.w_x) * instance.n + float(pool.w_psi) * float(np.abs(instance.coefficient_rows).sum())


def _reduced_objective(instance: Instance, X: np.ndarray) -> np.ndarray:
    """``w_x sum x + w_psi sum_j max(0, a.x - b - W)`` for each row of ``X``."""
    pool = instance.pool
    val = float(pool.w_x) * X.sum(axis=1)
    if instance.m:
        lhs = np.einsum("jk,pjk->pj", instance.coefficient_rows, X[:, instance.variables])
        val = val + float(pool.w_psi) * np.maximum(0.0, lhs - instance.rhs).sum(axis=1)
    return val


def _dense_rows(instance: Instance) -> np.ndarray:
    rows = np.zeros((instance.m, instance.n))
    for j in range(instance.m):
        np.add.at(rows[j], instance.variables[j], instance.coefficient_rows[j])
    return rows


def vertex_oracle_glp(instance: Instance) -> float:
    """Exact minimum of the reduced objective by enumerating arrangement vertices.

    The reduced objective is convex and affine on every cell cut out by the
    box faces and the breakpoint hyperplanes ``a.x = b + W``, so its minimum
    over the box sits on a point where ``n`` of those hyperplanes meet.
    """
    n = instance.n
    lo, hi = float(instance.pool.box_lo), float(instance.pool.box_hi)
    planes = [(np.eye(n)[i], lo) for i in range(n)] + [(np.eye(n)[i], hi) for i in range(n)]
    dense = _dense_rows(instance)
    for a, b in zip(dense, instance.rhs):
        if np.any(a != 0):
            planes.append((a, float(b)))
    normals = np.array([p[0] for p in planes])
    offsets = np.array([p[1] for p in planes])
    combos = np.array(list(itertools.combinations(range(len(planes)), n)))
    M = normals[combos]
    rhs = offsets[combos]
    det = np.linalg.det(M)
    ok = np.abs(det) > 1e-12
    pts = np.linalg.solve(M[ok], rhs[ok][..., None])[..., 0]
    inside = np.all((pts >= lo - 1e-9) & (pts <= hi + 1e-9), axis=1)
    pts = np.clip(pts[inside], lo, hi)
    return float(_reduced_objective(instance, pts).min())


def brute_oracle_glp(instance: Instance, grid_step: float, max_grid_points: int = 1 << 20) -> float:
    """Solver-free optimum of the generalized program for ``n <= 4``.

    Two independent searches over the reduced objective: an exhaustive grid
    (step ``grid_step``, coarsened if the grid would exceed
    ``max_grid_points``) and exact arrangement-vertex enumeration.  The
    minimum over both is within ``oracle_lipschitz(instance) * grid_step``
    of the optimum; in fact it is exact up to rounding.
    """
    if instance.n > 4:
        raise ValueError(f"brute-force oracle refuses n={instance.n} > 4")
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    lo, hi = float(instance.pool.box_lo), float(instance.pool.box_hi)
    per_axis = int(math.floor((hi - lo) / grid_step + 1e-9)) + 1
    while per_axis ** instance.n > max_grid_points:
        per_axis = (per_axis + 1) // 2
    axis = np.unique(np.append(np.linspace(lo, hi, per_axis), hi))
    grid = np.stack(np.meshgrid(*([axis] * instance.n), indexing="ij"), -1).reshape(-1, instance.n)
    best_grid = min(float(_reduced_objective(instance, chunk).min())
                    for chunk in np.array_split(grid, max(1, len(grid) // 65536)))
    return min(best_grid, vertex_oracle_glp(instance))


# ---------------------------------------------------------------- file format

def format_solution(solution: Solution) -> str:
    lines = [f"SOL objective={format(solution.objective, '.17g')}"]
    lines += [f"x {i} {format(v, '.17g')}" for i, v in enumerate(np.asarray(solution.x).tolist())]
    lines += [f"psi {j} {format(v, '.17g')}" for j, v in enumerate(np.asarray(solution.psi).tolist())]
    return "\n".join(lines) + "\n"


def parse_solution(text: str) -> Solution:
    objective = None
    xs, psis = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "SOL":
            objective = float(tok[1].split("=", 1)[1])
        elif tok[0] in ("x", "psi") and len(tok) == 3:
            (xs if tok[0] == "x" else psis)[int(tok[1])] = float(tok[2])
        else:
            raise ValueError(f"line {lineno}: malformed solution record")
    if objective is None:
        raise ValueError("missing SOL header")
    x = np.array([xs[i] for i in range(len(xs))])
    psi = np.array([psis[j] for j in range(len(psis))])
    return Solution(x, psi, objective)


def save_solution(solution: Solution, path) -> None:
    Path(path).write_text(format_solution(solution))
