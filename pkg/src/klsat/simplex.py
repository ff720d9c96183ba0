"""Dense bounded-variable primal simplex.

Solves ``min c.x  s.t.  A x (<=, >=, =) b,  lo <= x <= hi`` with finite
``lo`` (``hi`` may be ``inf``).  Nonbasic variables sit at one of their
bounds; the ratio test includes the entering variable's own bound flip.

Pivoting is Dantzig (most negative reduced cost, ties to the lowest index).
After ``DEGENERACY_LIMIT`` consecutive degenerate pivots the phase switches
to Bland's rule for the rest of that phase, which cannot cycle.  The
iteration budget is ``20 * (rows + columns) + 1000`` per phase.

Tolerances: feasibility 1e-9, optimality 1e-9, pivot 1e-11.
"""

from __future__ import annotations

import numpy as np

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-11
DEGENERACY_LIMIT = 50
REFACTOR_EVERY = 100

_BASIC, _AT_LO, _AT_HI = 0, 1, 2


class LPError(RuntimeError):
    status = "numerical_failure"


class InfeasibleError(LPError):
    status = "infeasible_input"


class UnboundedError(LPError):
    status = "unbounded"


class NumericalFailure(LPError):
    status = "numerical_failure"


class _Tableau:
    def __init__(self, A, b, lo, hi, basis, state, x):
        self.A, self.b, self.lo, self.hi = A, b, lo, hi
        self.basis = basis
        self.state = state
        self.x = x
        self.refactor()

    def refactor(self):
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis") from exc
        nonbasic = self.state != _BASIC
        rhs = self.b - self.A[:, nonbasic] @ self.x[nonbasic]
        self.x[self.basis] = self.Binv @ rhs

    def run(self, cost, budget):
        bland = False
        degenerate = 0
        m = len(self.basis)
        for it in range(budget):
            if it and it % REFACTOR_EVERY == 0:
                self.refactor()
            y = cost[self.basis] @ self.Binv
            d = cost - y @ self.A
            movable = self.hi > self.lo
            cand = movable & (
                ((self.state == _AT_LO) & (d < -OPT_TOL)) | ((self.state == _AT_HI) & (d > OPT_TOL))
            )
            idx = np.flatnonzero(cand)
            if idx.size == 0:
                return y
            j = int(idx[0]) if bland else int(idx[np.argmax(np.abs(d[idx]))])
            delta = 1.0 if self.state[j] == _AT_LO else -1.0
            alpha = self.Binv @ self.A[:, j]
            step = delta * alpha
            xb = self.x[self.basis]
            lob, hib = self.lo[self.basis], self.hi[self.basis]
            t_best = self.hi[j] - self.lo[j]
            leave = -1
            best_piv = 0.0
            for i in range(m):
                s = step[i]
                if s > PIVOT_TOL:
                    t = max(xb[i] - lob[i], 0.0) / s
                elif s < -PIVOT_TOL and np.isfinite(hib[i]):
                    t = max(hib[i] - xb[i], 0.0) / -s
                else:
                    continue
                if t < t_best - 1e-12:
                    t_best, leave, best_piv = t, i, abs(s)
                elif t <= t_best + 1e-12 and leave >= 0:
                    if bland:
                        if self.basis[i] < self.basis[leave]:
                            leave, best_piv = i, abs(s)
                    elif abs(s) > best_piv:
                        leave, best_piv = i, abs(s)
            if not np.isfinite(t_best):
                raise UnboundedError("objective unbounded below")
            degenerate = degenerate + 1 if t_best <= 1e-12 else 0
            if degenerate > DEGENERACY_LIMIT:
                bland = True
            self.x[j] += delta * t_best
            self.x[self.basis] = xb - t_best * step
            if leave < 0:
                self.state[j] = _AT_HI if delta > 0 else _AT_LO
                continue
            out = self.basis[leave]
            if step[leave] > 0:
                self.x[out], self.state[out] = self.lo[out], _AT_LO
            else:
                self.x[out], self.state[out] = self.hi[out], _AT_HI
            piv = alpha[leave]
            row = self.Binv[leave] / piv
            self.Binv -= np.outer(alpha, row)
            self.Binv[leave] = row
            self.basis[leave] = j
            self.state[j] = _BASIC
        raise NumericalFailure(f"simplex iteration budget {budget} exhausted")


def simplex_solve(c, A, senses, b, lo, hi):
    """Return ``(x, y)``: an optimal vertex and row duals (``c = A^T y + reduced``)."""
    A = np.asarray(A, dtype=float)
    m, n = A.shape
    c = np.asarray(c, float)
    b = np.asarray(b, float)
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    if not np.all(np.isfinite(lo)):
        raise ValueError("dense simplex requires finite lower bounds")
    if np.any(lo > hi):
        raise InfeasibleError("variable with lo > hi")
    senses = list(senses)

    # structural | slacks | artificials
    ineq = [i for i, s in enumerate(senses) if s != "="]
    n_s = len(ineq)
    x0 = lo.copy()
    resid = b - A @ x0
    cols = [A]
    slack = np.zeros((m, n_s))
    basis = [-1] * m
    for k, i in enumerate(ineq):
        sign = 1.0 if senses[i] == "<=" else -1.0
        slack[i, k] = sign
        if sign * resid[i] >= 0:
            basis[i] = n + k
    cols.append(slack)
    art_rows = [i for i in range(m) if basis[i] < 0]
    art = np.zeros((m, len(art_rows)))
    for k, i in enumerate(art_rows):
        art[i, k] = 1.0 if resid[i] >= 0 else -1.0
        basis[i] = n + n_s + k
    cols.append(art)
    full = np.hstack(cols)
    N = full.shape[1]
    lo_f = np.concatenate([lo, np.zeros(n_s + len(art_rows))])
    hi_f = np.concatenate([hi, np.full(n_s, np.inf), np.full(len(art_rows), np.inf)])
    xf = np.concatenate([x0, np.zeros(N - n)])
    state = np.full(N, _AT_LO)
    basis = np.asarray(basis, dtype=np.int64)
    state[basis] = _BASIC
    budget = 20 * (m + N) + 1000
    tab = _Tableau(full, b, lo_f, hi_f, basis, state, xf)

    if art_rows:
        phase1 = np.zeros(N)
        phase1[n + n_s:] = 1.0
        tab.run(phase1, budget)
        infeas = tab.x[n + n_s:].sum()
        if infeas > FEAS_TOL * (1.0 + np.abs(b).max(initial=0.0)) * max(1, len(art_rows)):
            raise InfeasibleError(f"phase I residual {infeas:.3e}")
        # artificials stay fixed at zero from here on
        tab.hi[n + n_s:] = 0.0
        nonbasic_art = (tab.state[n + n_s:] != _BASIC)
        tab.x[n + n_s:][nonbasic_art] = 0.0
        tab.refactor()

    cost = np.concatenate([c, np.zeros(N - n)])
    y = tab.run(cost, budget)
    x = np.clip(tab.x[:n], lo, hi)
    return x, y
