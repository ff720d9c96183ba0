"""Weighted b-matchings on sparse random graphs.

The degree-only relaxation LPM0 (per-node degree <= b, 0 <= x_e <= 1), its
dual, the rewrite of that dual as a generalized K=2 program, Karp-Sipser
leaf removal, the Karp-Sipser fixed point, and the short-cycle sandwich
certificate.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq
from scipy.special import lambertw

from .instance import TOPOLOGY_STREAM, WEIGHT_STREAM, Instance, constraint_count, stream_rng
from .lp import LinearProgram, solve_lp
from .pool import ConstraintTemplate, Pool, WeightDistSpec

BRUTE_FORCE_MAX_EDGES = 24
RESIDUAL_EXACT_MAX_NODES = 16


@dataclass(frozen=True)
class WeightedGraph:
    n: int
    edges: tuple  # ((i, j, w), ...) with i < j
    b_w: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        edges = tuple((int(i), int(j), float(w)) for i, j, w in self.edges)
        object.__setattr__(self, "edges", edges)
        seen = set()
        for i, j, w in edges:
            if not 0 <= i < j < self.n:
                raise ValueError(f"edge ({i}, {j}) needs 0 <= i < j < n")
            if (i, j) in seen:
                raise ValueError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
            if w < 0:
                raise ValueError(f"negative weight on edge ({i}, {j})")
        top = max((w for _, _, w in edges), default=0.0)
        if self.b_w is None:
            object.__setattr__(self, "b_w", top)
        elif top > self.b_w:
            raise ValueError(f"edge weight {top} exceeds declared support bound {self.b_w}")

    @property
    def m(self) -> int:
        return len(self.edges)

    @property
    def w_max(self) -> float:
        return max((w for _, _, w in self.edges), default=0.0)

    def adjacency(self) -> list:
        adj = [set() for _ in range(self.n)]
        for i, j, _ in self.edges:
            adj[i].add(j)
            adj[j].add(i)
        return adj

    def unit(self) -> "WeightedGraph":
        return WeightedGraph(self.n, tuple((i, j, 1.0) for i, j, _ in self.edges), seed=self.seed)


def _pair_from_index(k: np.ndarray) -> tuple:
    # k = a(a-1)/2 + b with 0 <= b < a
    a = np.floor((1 + np.sqrt(1 + 8 * k.astype(float))) / 2).astype(np.int64)
    a -= (a * (a - 1) // 2) > k
    a += ((a + 1) * a // 2) <= k
    b = k - a * (a - 1) // 2
    return b, a


def gen_graph(n: int, c, weight_dist: WeightDistSpec, seed: int) -> WeightedGraph:
    """G(n, cn): floor(cn) distinct uniform edges with independent weights."""
    m = constraint_count(n, c)
    total = n * (n - 1) // 2
    if m > total:
        raise ValueError(f"{m} edges requested but only {total} pairs exist on {n} nodes")
    if weight_dist.support[0] < 0:
        raise ValueError("edge weights must be nonnegative")
    picks = stream_rng(seed, TOPOLOGY_STREAM).choice(total, size=m, replace=False) if m else np.zeros(0, np.int64)
    i, j = _pair_from_index(np.sort(np.asarray(picks, dtype=np.int64)))
    order = np.lexsort((j, i))
    i, j = i[order], j[order]
    w = weight_dist.sample(stream_rng(seed, WEIGHT_STREAM), m)
    return WeightedGraph(n, tuple(zip(i.tolist(), j.tolist(), w.tolist())),
                         b_w=float(weight_dist.bound), seed=seed)


# ---------------------------------------------------------------- LPM0

def _incidence(graph: WeightedGraph) -> sp.csr_matrix:
    m = graph.m
    ends = np.array([(i, j) for i, j, _ in graph.edges], dtype=np.int64).reshape(m, 2)
    return sp.csr_matrix((np.ones(2 * m), (ends.ravel(), np.repeat(np.arange(m), 2))),
                         shape=(graph.n, m))


def lpm0_primal(graph: WeightedGraph, b: int, method: str = "highs"):
    """max sum w_e x_e  s.t.  sum_{e at v} x_e <= b,  0 <= x_e <= 1.  Returns ``(value, x)``."""
    if b < 1:
        raise ValueError("b must be >= 1")
    if graph.m == 0:
        return 0.0, np.zeros(0)
    w = np.array([w for _, _, w in graph.edges])
    lp = LinearProgram(w, _incidence(graph), np.full(graph.n, "<="), np.full(graph.n, float(b)),
                       np.zeros(graph.m), np.ones(graph.m), "max")
    x, value, _ = solve_lp(lp, method)
    return value, x


def lpm0_dual(graph: WeightedGraph, b: int, method: str = "highs"):
    """min b sum y + sum psi  s.t.  y_i + y_j + psi_e >= w_e,  y, psi >= 0.

    Returns ``(value, y, psi)``.
    """
    if b < 1:
        raise ValueError("b must be >= 1")
    n, m = graph.n, graph.m
    if m == 0:
        return 0.0, np.zeros(n), np.zeros(0)
    A = sp.hstack([_incidence(graph).T, sp.identity(m)]).tocsr()
    c = np.concatenate([np.full(n, float(b)), np.ones(m)])
    w = np.array([w for _, _, w in graph.edges])
    lp = LinearProgram(c, A, np.full(m, ">="), w, np.zeros(n + m), np.full(n + m, np.inf), "min")
    z, value, _ = solve_lp(lp, method)
    return value, z[:n], z[n:]


def dual_as_glp(graph: WeightedGraph, b: int) -> Instance:
    """The dual rewritten as a generalized program.

    One K=2 template ``-y1 - y2 <= 0``, box ``[0, B_w]``, ``w_x = b``,
    ``w_psi = 1``, realized weight ``-w_e`` per edge.  Capping ``y`` at
    ``B_w`` loses nothing since no edge weight exceeds it.
    """
    if b < 1:
        raise ValueError("b must be >= 1")
    cap = graph.b_w if graph.b_w and graph.b_w > 0 else 1.0
    negw = [-w for _, _, w in graph.edges]
    if negw:
        values = sorted(set(negw))
        counts = {v: 0 for v in values}
        for v in negw:
            counts[v] += 1
        dist = WeightDistSpec("discrete", (tuple(values), tuple(Fraction(counts[v], len(negw)) for v in values)),
                              bound=cap)
    else:
        dist = WeightDistSpec("constant", (0.0,), bound=cap)
    pool = Pool(2, (ConstraintTemplate((-1, -1), 0),), 0.0, float(cap), dist, b, 1)
    ends = [(i, j) for i, j, _ in graph.edges]
    return Instance(pool, graph.n, np.array(ends, dtype=np.int64).reshape(-1, 2),
                    np.zeros(graph.m, dtype=np.int64), negw,
                    c=graph.m / graph.n if graph.n else 0.0, seed=graph.seed)


# ---------------------------------------------------------------- exact oracle

def _best_bmatching(n: int, edges: list, b: int):
    """Branch and bound over include/exclude decisions; lexicographic (weight, size)."""
    order = sorted(range(len(edges)), key=lambda e: -edges[e][2])
    es = [edges[e] for e in order]
    cap = [b] * n
    best = [0.0, 0]
    eps = 1e-12 * (1.0 + sum(w for _, _, w in es))

    def bound(k):
        # each node can still take its `cap` heaviest remaining incident edges
        per_node = {}
        for i, j, w in es[k:]:
            if cap[i] and cap[j]:
                per_node.setdefault(i, []).append(w)
                per_node.setdefault(j, []).append(w)
        total = sum(sum(sorted(ws, reverse=True)[:cap[v]]) for v, ws in per_node.items())
        count = sum(min(len(ws), cap[v]) for v, ws in per_node.items())
        return total / 2.0, count // 2

    def search(k, value, size):
        if value > best[0] + eps or (value >= best[0] - eps and size > best[1]):
            best[0], best[1] = value, size
        if k == len(es):
            return
        ub_w, ub_s = bound(k)
        if value + ub_w < best[0] - eps:
            return
        if value + ub_w <= best[0] + eps and size + ub_s <= best[1]:
            return
        i, j, w = es[k]
        if cap[i] and cap[j]:
            cap[i] -= 1
            cap[j] -= 1
            search(k + 1, value + w, size + 1)
            cap[i] += 1
            cap[j] += 1
        search(k + 1, value, size)

    search(0, 0.0, 0)
    return best[0], best[1]


def exact_bmatching_bruteforce(graph: WeightedGraph, b: int):
    """Exact maximum weight b-matching (ties broken toward more edges): ``(value, size)``."""
    if graph.m > BRUTE_FORCE_MAX_EDGES:
        raise ValueError(f"brute force refuses {graph.m} > {BRUTE_FORCE_MAX_EDGES} edges")
    if b < 1:
        raise ValueError("b must be >= 1")
    return _best_bmatching(graph.n, list(graph.edges), b)


# ---------------------------------------------------------------- Karp-Sipser

@dataclass(frozen=True)
class KarpSipserResult:
    marked_edges: tuple
    residual: WeightedGraph
    exact_total: Optional[int]


def karp_sipser(graph: WeightedGraph) -> KarpSipserResult:
    """Leaf removal: match the lowest-index leaf to its parent until no leaf is left.

    Each step deletes the leaf, its parent, and the parent's other leaf
    children.  When the leafless residual has at most 16 non-isolated nodes,
    its maximum matching is found exactly and added to the marked count.
    """
    adj = graph.adjacency()
    alive = [True] * graph.n
    heap = [v for v in range(graph.n) if len(adj[v]) == 1]
    heapq.heapify(heap)
    marked = []

    def delete(u):
        alive[u] = False
        for nb in adj[u]:
            adj[nb].discard(u)
            if alive[nb] and len(adj[nb]) == 1:
                heapq.heappush(heap, nb)
        adj[u] = set()

    while heap:
        v = heapq.heappop(heap)
        if not alive[v] or len(adj[v]) != 1:
            continue
        (p,) = adj[v]
        marked.append((min(v, p), max(v, p)))
        siblings = [u for u in adj[p] if u != v and len(adj[u]) == 1]
        for u in [v, p] + siblings:
            if alive[u]:
                delete(u)
    weights = {(i, j): w for i, j, w in graph.edges}
    residual_edges = tuple(
        (i, j, weights[(i, j)]) for i, j, _ in graph.edges if alive[i] and alive[j]
    )
    residual = WeightedGraph(graph.n, residual_edges, b_w=graph.b_w, seed=graph.seed)
    nodes = {v for i, j, _ in residual_edges for v in (i, j)}
    exact = None
    if len(nodes) <= RESIDUAL_EXACT_MAX_NODES:
        _, size = _best_bmatching(graph.n, [(i, j, 1.0) for i, j, _ in residual_edges], 1)
        exact = len(marked) + size
    return KarpSipserResult(tuple(marked), residual, exact)


def gamma_fixed_point(c: float, max_iter: int = 1_000_000):
    """Least root of ``x = c exp(-c exp(-x))`` and ``c exp(-root)``.

    The map is increasing, so iterating from 0 climbs monotonically to the
    least fixed point.  Near ``c = e`` that climb is sublinear, so an
    unfinished iteration is polished using the structure of the roots:
    fixed points pair up as ``(x, c e^-x)`` and the self-paired one is
    ``W(c)`` (Lambert W).  For ``c <= e`` that is the only root; above ``e``
    the least root is bracketed between the iterate and ``W(c)``.
    """
    if c < 0:
        raise ValueError("c must be >= 0")

    def h(x):
        return c * math.exp(-c * math.exp(-x)) - x

    x = 0.0
    for _ in range(max_iter):
        nxt = c * math.exp(-c * math.exp(-x))
        if nxt <= x:
            break
        x = nxt
        if abs(h(x)) < 1e-14:
            break
    if abs(h(x)) >= 1e-13:
        mid = float(lambertw(c).real)
        if c <= math.e:
            x = mid
        else:
            gap = mid - x
            for _ in range(60):
                gap /= 2
                if h(mid - gap) < 0:
                    x = brentq(h, x, mid - gap, xtol=1e-16, rtol=4 * np.finfo(float).eps)
                    break
    return x, c * math.exp(-x)


def ks_limit(c: float, form: str = "printed") -> float:
    """Karp-Sipser matching-fraction formula.

    ``printed``: ``1 - (g_lo + g_up + g_lo g_up) / 2``;
    ``degree_normalized``: same numerator over ``2c``.
    """
    if form not in ("printed", "degree_normalized"):
        raise ValueError(f"unknown form {form!r}")
    if not c > 0:
        raise ValueError("c must be positive")
    lo, up = gamma_fixed_point(c)
    num = lo + up + lo * up
    if form == "printed":
        return 1.0 - num / 2.0
    return 1.0 - num / (2.0 * c)


# ---------------------------------------------------------------- certificate

@dataclass(frozen=True)
class MatchingCertificate:
    lpm0: float
    d: int
    m_d: int
    w_max: float
    lower: float
    upper: float


def short_cycle_edges(graph: WeightedGraph, d: int) -> list:
    """Edges lying on some cycle of length < d.

    An edge (u, v) lies on a cycle of length L iff v is reachable from u in
    L - 1 steps without that edge; a shortest such path is simple, so a
    depth-capped BFS decides it exactly.
    """
    adj = graph.adjacency()
    limit = d - 2
    out = []
    for i, j, _ in graph.edges:
        dist = {i: 0}
        queue = deque([i])
        hit = False
        while queue and not hit:
            u = queue.popleft()
            if dist[u] >= limit:
                continue
            for v in adj[u]:
                if u == i and v == j:
                    continue
                if v not in dist:
                    dist[v] = dist[u] + 1
                    if v == j:
                        hit = True
                        break
                    queue.append(v)
        if hit:
            out.append((i, j))
    return out


def certify_bmatching(graph: WeightedGraph, b: int, d: int, method: str = "highs") -> MatchingCertificate:
    """Bracket the maximum weight b-matching between a short-cycle-corrected LPM0 and LPM0."""
    if d < 3:
        raise ValueError("d must be >= 3")
    lpm0, _ = lpm0_primal(graph, b, method)
    m_d = len(short_cycle_edges(graph, d))
    w_max = graph.w_max
    lower = max(0.0, (d - 1) / d * (lpm0 - m_d * w_max))
    return MatchingCertificate(lpm0, d, m_d, w_max, lower, lpm0)


# ---------------------------------------------------------------- file format

def format_graph(graph: WeightedGraph) -> str:
    lines = [f"GRAPH n={graph.n} m={graph.m} bw={format(graph.b_w, '.17g')} seed={graph.seed}"]
    lines += [f"E {i} {j} {format(w, '.17g')}" for i, j, w in graph.edges]
    return "\n".join(lines) + "\n"


def parse_graph(text: str) -> WeightedGraph:
    header = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        if tok[0] == "GRAPH":
            header = dict(t.split("=", 1) for t in tok[1:])
        elif tok[0] == "E" and len(tok) == 4:
            edges.append((int(tok[1]), int(tok[2]), float(tok[3])))
        else:
            raise ValueError(f"line {lineno}: malformed graph record")
    if header is None:
        raise ValueError("missing GRAPH header")
    if int(header["m"]) != len(edges):
        raise ValueError(f"header says m={header['m']} but {len(edges)} edges follow")
    bw = float(header["bw"]) if "bw" in header else None
    return WeightedGraph(int(header["n"]), tuple(edges), b_w=bw, seed=int(header.get("seed", 0)))


def save_graph(graph: WeightedGraph, path) -> None:
    Path(path).write_text(format_graph(graph))


def load_graph(path) -> WeightedGraph:
    return parse_graph(Path(path).read_text())
