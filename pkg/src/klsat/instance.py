"""Random K-LSAT instances and their constraint hypergraph.

Randomness
----------
Every instance is drawn from numpy's PCG64 generator.  A seed ``s`` (taken
modulo 2**64) feeds ``SeedSequence(s, spawn_key=(stream,))`` with one stream
per purpose:

    0  variable tuples (topology)
    1  template choice
    2  weights

so the topology does not depend on the template count or the weight law.
Each constraint consumes its draws in order, so the first ``m1`` constraints
of an ``m2 > m1`` instance with the same seed are exactly the ``m1``-instance
(the coupling used by the monotonicity experiments).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np

from .pool import Pool

TOPOLOGY_STREAM, TEMPLATE_STREAM, WEIGHT_STREAM = 0, 1, 2
_SEED_MASK = (1 << 64) - 1


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & _SEED_MASK, spawn_key=(stream,))
    return np.random.Generator(np.random.PCG64(ss))


def constraint_count(n: int, c) -> int:
    """floor(c * n), evaluated on the decimal value of ``c`` (0.29 * 100 -> 29)."""
    return math.floor(Fraction(repr(c) if isinstance(c, float) else c) * n)


class ConstraintInstance(NamedTuple):
    variables: tuple
    template: int
    weight: float


class Instance:
    """A realized random program: ``m`` constraints over ``n`` box variables.

    Stored column-wise: ``variables`` is an (m, K) int array, ``templates`` an
    (m,) int array of template indices, ``weights`` the realized ``W_j``.
    """

    def __init__(self, pool: Pool, n: int, variables, templates, weights,
                 c=None, seed: int = 0, replacement: bool = True):
        self.pool = pool
        self.n = int(n)
        self.variables = np.asarray(variables, dtype=np.int64).reshape(-1, pool.K)
        self.templates = np.asarray(templates, dtype=np.int64).reshape(-1)
        self.weights = np.asarray(weights, dtype=float).reshape(-1)
        m = len(self.variables)
        if len(self.templates) != m or len(self.weights) != m:
            raise ValueError("variables, templates and weights disagree on m")
        if m and (self.variables.min() < 0 or self.variables.max() >= self.n):
            raise ValueError("variable index outside [0, n)")
        if m and (self.templates.min() < 0 or self.templates.max() >= len(pool.templates)):
            raise ValueError("template index outside the pool")
        self.c = (m / self.n if self.n else 0.0) if c is None else c
        self.seed = int(seed)
        self.replacement = bool(replacement)

    @property
    def m(self) -> int:
        return len(self.templates)

    @property
    def K(self) -> int:
        return self.pool.K

    @property
    def constraints(self) -> list:
        return [
            ConstraintInstance(tuple(int(v) for v in row), int(r), float(w))
            for row, r, w in zip(self.variables, self.templates, self.weights)
        ]

    def __eq__(self, other):
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.n == other.n and self.seed == other.seed and self.pool == other.pool
            and np.array_equal(self.variables, other.variables)
            and np.array_equal(self.templates, other.templates)
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self):
        return f"Instance(n={self.n}, m={self.m}, K={self.K}, c={self.c}, seed={self.seed})"

    # dense per-constraint data used by the LP builders
    @cached_property
    def coefficient_rows(self) -> np.ndarray:
        """(m, K) float array of ``a_{r_j k}``."""
        return self.pool.coefficient_matrix()[self.templates] if self.m else np.zeros((0, self.K))

    @cached_property
    def rhs(self) -> np.ndarray:
        """(m,) array of ``b_{r_j} + W_j``."""
        return self.pool.rhs_vector()[self.templates] + self.weights if self.m else np.zeros(0)

    @cached_property
    def incidence(self) -> list:
        """variable -> sorted list of constraints containing it (each listed once)."""
        inc = [[] for _ in range(self.n)]
        for j, row in enumerate(self.variables.tolist()):
            for v in dict.fromkeys(row):
                inc[v].append(j)
        return inc

    @cached_property
    def distinct_vars(self) -> list:
        return [tuple(dict.fromkeys(row)) for row in self.variables.tolist()]

    def lhs(self, x: np.ndarray) -> np.ndarray:
        """``sum_k a_{r_j k} x_{i_k}`` for every constraint."""
        if not self.m:
            return np.zeros(0)
        return np.einsum("jk,jk->j", self.coefficient_rows, np.asarray(x, float)[self.variables])

    def optimal_psi(self, x: np.ndarray) -> np.ndarray:
        """The slack each constraint needs at ``x``: ``max(0, a.x - b - W)``."""
        return np.maximum(0.0, self.lhs(x) - self.rhs)

    def prefix(self, m: int) -> "Instance":
        c = Fraction(m, self.n) if self.n else 0
        return Instance(self.pool, self.n, self.variables[:m], self.templates[:m],
                        self.weights[:m], c=float(c), seed=self.seed, replacement=self.replacement)

    def replace_constraint(self, j: int, template: Optional[int] = None,
                           weight: Optional[float] = None, variables=None) -> "Instance":
        v, t, w = self.variables.copy(), self.templates.copy(), self.weights.copy()
        if variables is not None:
            v[j] = variables
        if template is not None:
            t[j] = template
        if weight is not None:
            w[j] = weight
        return Instance(self.pool, self.n, v, t, w, c=self.c, seed=self.seed,
                        replacement=self.replacement)


def _ordered_distinct(u: np.ndarray) -> np.ndarray:
    """Map draws ``u[:, k] ~ U{0..n-k-1}`` to uniform ordered K-tuples of distinct values."""
    out = np.empty_like(u)
    for k in range(u.shape[1]):
        v = u[:, k].copy()
        if k:
            prior = np.sort(out[:, :k], axis=1)
            for j in range(k):
                v += v >= prior[:, j]
        out[:, k] = v
    return out


def generate_instance(pool: Pool, n: int, c, seed: int, replacement: bool = True) -> Instance:
    if n < 1:
        raise ValueError("n must be positive")
    if c < 0:
        raise ValueError("c must be >= 0")
    K = pool.K
    if not replacement and n < K:
        raise ValueError(f"cannot pick {K} distinct variables out of n={n}")
    m = constraint_count(n, c)
    topo = stream_rng(seed, TOPOLOGY_STREAM)
    if replacement:
        variables = topo.integers(0, n, size=(m, K))
    else:
        variables = _ordered_distinct(topo.integers(0, n - np.arange(K), size=(m, K)))
    templates = stream_rng(seed, TEMPLATE_STREAM).integers(0, len(pool.templates), size=m)
    weights = pool.weight_dist.sample(stream_rng(seed, WEIGHT_STREAM), m)
    return Instance(pool, n, variables, templates, weights, c=c, seed=seed, replacement=replacement)


# ---------------------------------------------------------------- hypergraph

@dataclass(frozen=True)
class Neighborhood:
    root: int
    depth: int
    variables: tuple
    constraints: tuple
    is_tree: bool


def neighborhood(instance: Instance, root: int, d: int) -> Neighborhood:
    """Variables within ``d`` chained constraints of ``root`` and the constraints they contain."""
    if not 0 <= root < instance.n:
        raise ValueError(f"root {root} outside [0, {instance.n})")
    if d < 0:
        raise ValueError("depth must be >= 0")
    inc, dv = instance.incidence, instance.distinct_vars
    seen = {root}
    frontier = [root]
    used = set()
    for _ in range(d):
        nxt = []
        for x in frontier:
            for j in inc[x]:
                if j in used:
                    continue
                used.add(j)
                for y in dv[j]:
                    if y not in seen:
                        seen.add(y)
                        nxt.append(y)
        frontier = nxt
        if not frontier:
            break
    if d == 0:
        cons = ()
    else:
        cand = {j for x in seen for j in inc[x]}
        cons = tuple(sorted(j for j in cand if all(y in seen for y in dv[j])))
    edges = sum(len(dv[j]) for j in cons)
    # the ball is connected, so it is a tree iff |E| = |V| - 1 on the incidence graph
    is_tree = edges == len(seen) + len(cons) - 1
    return Neighborhood(root, d, tuple(sorted(seen)), cons, is_tree)


def _canonical_cycle(seq: list) -> tuple:
    # seq starts at its smallest constraint index; fix the reflection
    rev = [seq[0]] + seq[:0:-1]
    return tuple(min(seq, rev))


def find_cycles(instance: Instance, r_max: int) -> dict:
    """All constraint cycles of length 2..r_max, keyed by length, as canonical tuples.

    A cycle of length r is r distinct constraints C_1..C_r and r distinct
    variables x_1..x_r with x_t shared by C_t and C_{t+1} (C_{r+1} = C_1).
    """
    if r_max < 2:
        raise ValueError("r_max must be >= 2")
    inc, dv = instance.incidence, instance.distinct_vars
    found = {r: set() for r in range(2, r_max + 1)}

    def extend(path, used_vars, start_vars):
        last = path[-1]
        for x in dv[last]:
            if x in used_vars:
                continue
            if len(path) >= 2 and x in start_vars:
                found[len(path)].add(_canonical_cycle(path))
            if len(path) < r_max:
                used_vars.add(x)
                for j in inc[x]:
                    if j > path[0] and j not in path:
                        path.append(j)
                        extend(path, used_vars, start_vars)
                        path.pop()
                used_vars.discard(x)

    for s in range(instance.m):
        extend([s], set(), set(dv[s]))
    return found


def cycle_census(instance: Instance, r_max: int) -> dict:
    return {r: len(cyc) for r, cyc in find_cycles(instance, r_max).items()}


def variable_degrees(instance: Instance) -> np.ndarray:
    """Occurrences of each variable over all constraints (repeats counted)."""
    return np.bincount(instance.variables.ravel(), minlength=instance.n)


def degree_histogram(instance: Instance) -> dict:
    freq = np.bincount(variable_degrees(instance)) / instance.n
    return {d: float(f) for d, f in enumerate(freq) if f > 0}


# ---------------------------------------------------------------- file format

def format_instance(instance: Instance) -> str:
    lines = [
        f"KLSAT n={instance.n} m={instance.m} K={instance.K} seed={instance.seed} "
        f"c={float(instance.c)!r} replacement={int(instance.replacement)}"
    ]
    for row, r, w in zip(instance.variables.tolist(), instance.templates.tolist(),
                         instance.weights.tolist()):
        lines.append(f"C {r} {' '.join(map(str, row))} {format(w, '.17g')}")
    return "\n".join(lines) + "\n"


def parse_instance(text: str, pool: Pool) -> Instance:
    header = None
    rows, temps, weights = [], [], []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "KLSAT":
            header = dict(t.split("=", 1) for t in tok[1:])
        elif tok[0] == "C":
            if len(tok) != pool.K + 3:
                raise ValueError(f"line {lineno}: expected {pool.K} variable indices")
            temps.append(int(tok[1]))
            rows.append([int(t) for t in tok[2:-1]])
            weights.append(float(tok[-1]))
        else:
            raise ValueError(f"line {lineno}: unknown record {tok[0]!r}")
    if header is None:
        raise ValueError("missing KLSAT header")
    n, m, K = int(header["n"]), int(header["m"]), int(header["K"])
    if K != pool.K:
        raise ValueError(f"instance has K={K} but pool has K={pool.K}")
    if m != len(rows):
        raise ValueError(f"header says m={m} but {len(rows)} constraints follow")
    c = float(header["c"]) if "c" in header else (m / n)
    return Instance(pool, n, np.array(rows, dtype=np.int64).reshape(-1, K), temps, weights,
                    c=c, seed=int(header.get("seed", 0)),
                    replacement=bool(int(header.get("replacement", 1))))


def save_instance(instance: Instance, path) -> None:
    Path(path).write_text(format_instance(instance))


def load_instance(path, pool: Pool) -> Instance:
    return parse_instance(Path(path).read_text(), pool)
