"""Constraint pools: templates, variable box, weight law, and the A/B conditions.

Coefficients may be ``fractions.Fraction`` (the pool file parser produces
them) in which case the condition checks and ``b_psi`` are exact.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real
from pathlib import Path
from typing import Optional, Sequence

import numpy as np


class PoolError(ValueError):
    """Invalid pool data or a violated precondition of a pool operation."""


@dataclass(frozen=True)
class ConstraintTemplate:
    coefficients: tuple
    rhs: Real

    def __post_init__(self):
        coeffs = tuple(self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if len(coeffs) < 1:
            raise PoolError("template needs K >= 1 coefficients")
        for v in coeffs + (self.rhs,):
            if not math.isfinite(float(v)):
                raise PoolError(f"non-finite template entry {v!r}")

    @property
    def K(self) -> int:
        return len(self.coefficients)


@dataclass(frozen=True)
class WeightDistSpec:
    """Law of the per-constraint weight ``W_j``.

    kind is ``constant`` (params ``(v,)``), ``uniform`` (``(lo, hi)``) or
    ``discrete`` (``(values, probabilities)``).  ``bound`` is the declared
    support bound B_w; when omitted it is the tightest one.
    """

    kind: str
    params: tuple
    bound: Optional[Real] = None

    def __post_init__(self):
        if self.kind == "constant":
            (v,) = self.params
            lo = hi = v
        elif self.kind == "uniform":
            lo, hi = self.params
            if not lo <= hi:
                raise PoolError(f"uniform weight law needs lo <= hi, got {self.params}")
        elif self.kind == "discrete":
            values, probs = self.params
            values, probs = tuple(values), tuple(probs)
            if len(values) == 0 or len(values) != len(probs):
                raise PoolError("discrete weight law needs matching nonempty values/probabilities")
            if any(p < 0 for p in probs) or abs(float(sum(probs)) - 1.0) > 1e-12:
                raise PoolError("discrete probabilities must be nonnegative and sum to 1")
            object.__setattr__(self, "params", (values, probs))
            lo, hi = min(values), max(values)
        else:
            raise PoolError(f"unknown weight law {self.kind!r}")
        tight = max(abs(lo), abs(hi))
        if self.bound is None:
            object.__setattr__(self, "bound", tight)
        elif self.bound < tight:
            raise PoolError(f"weight support [{lo}, {hi}] exceeds declared bound {self.bound}")

    @classmethod
    def constant(cls, v=0):
        return cls("constant", (v,))

    @classmethod
    def uniform(cls, lo, hi):
        return cls("uniform", (lo, hi))

    @classmethod
    def discrete(cls, values, probabilities):
        return cls("discrete", (tuple(values), tuple(probabilities)))

    @property
    def support(self) -> tuple:
        if self.kind == "constant":
            return (self.params[0], self.params[0])
        if self.kind == "uniform":
            return tuple(self.params)
        return (min(self.params[0]), max(self.params[0]))

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        # one draw per item, consumed in order: prefixes of a stream agree
        if self.kind == "constant":
            return np.full(size, float(self.params[0]))
        if self.kind == "uniform":
            lo, hi = (float(v) for v in self.params)
            return rng.uniform(lo, hi, size=size)
        values, probs = self.params
        p = np.asarray([float(q) for q in probs])
        idx = np.searchsorted(np.cumsum(p), rng.random(size), side="right")
        idx = np.minimum(idx, len(values) - 1)
        return np.asarray([float(v) for v in values])[idx]

    def to_string(self) -> str:
        if self.kind == "constant":
            body = _num(self.params[0])
        elif self.kind == "uniform":
            body = ",".join(_num(v) for v in self.params)
        else:
            body = ",".join(f"{_num(v)}:{_num(p)}" for v, p in zip(*self.params))
        return f"{self.kind}({body})"

    @classmethod
    def from_string(cls, text: str) -> "WeightDistSpec":
        text = text.strip()
        if not text.endswith(")") or "(" not in text:
            raise PoolError(f"malformed weight law {text!r}")
        kind, body = text[:-1].split("(", 1)
        parts = [p for p in body.split(",") if p]
        try:
            if kind == "constant":
                return cls.constant(_parse_num(parts[0]))
            if kind == "uniform":
                return cls.uniform(_parse_num(parts[0]), _parse_num(parts[1]))
            if kind == "discrete":
                pairs = [p.split(":") for p in parts]
                return cls.discrete([_parse_num(v) for v, _ in pairs], [_parse_num(q) for _, q in pairs])
        except (IndexError, ValueError) as exc:
            raise PoolError(f"malformed weight law {text!r}: {exc}") from exc
        raise PoolError(f"unknown weight law {kind!r}")


@dataclass(frozen=True)
class Pool:
    K: int
    templates: tuple
    box_lo: Real
    box_hi: Real
    weight_dist: WeightDistSpec = field(default_factory=WeightDistSpec.constant)
    w_x: Real = 0
    w_psi: Real = 1

    def __post_init__(self):
        object.__setattr__(self, "templates", tuple(self.templates))
        if self.K < 1:
            raise PoolError("K must be positive")
        if not self.templates:
            raise PoolError("pool needs at least one template")
        for t in self.templates:
            if t.K != self.K:
                raise PoolError(f"template {t} has {t.K} coefficients, expected {self.K}")
        if not self.box_lo < self.box_hi:
            raise PoolError(f"empty box [{self.box_lo}, {self.box_hi}]")
        if self.w_x < 0:
            raise PoolError("w_x must be >= 0")
        if not self.w_psi > 0:
            raise PoolError("w_psi must be > 0")

    @property
    def B_w(self):
        return self.weight_dist.bound

    def coefficient_matrix(self) -> np.ndarray:
        return np.array([[float(a) for a in t.coefficients] for t in self.templates])

    def rhs_vector(self) -> np.ndarray:
        return np.array([float(t.rhs) for t in self.templates])


def standard_pool(weight_dist: Optional[WeightDistSpec] = None, w_x=0, w_psi=1) -> Pool:
    """The eight K=3 templates ``-l1 - l2 - l3 <= -7/4`` over all literal patterns.

    A literal is ``y_k`` or ``1 - y_k``; each negated literal moves a ``+1``
    to the coefficient and a ``+1`` to the right-hand side.
    """
    templates = []
    for negated in itertools.product((False, True), repeat=3):
        coeffs = tuple(Fraction(1) if neg else Fraction(-1) for neg in negated)
        rhs = Fraction(-7, 4) + sum(negated)
        templates.append(ConstraintTemplate(coeffs, rhs))
    return Pool(3, tuple(templates), Fraction(0), Fraction(1),
                weight_dist or WeightDistSpec.constant(0), w_x, w_psi)


def _endpoint_min(a, lo, hi):
    return min(a * lo, a * hi)


def _endpoint_max(a, lo, hi):
    return max(a * lo, a * hi)


def box_min_partial(template: ConstraintTemplate, fixed_index: int, fixed_value, pool: Pool):
    """Minimum of ``a . y`` over the box with ``y[fixed_index] = fixed_value``."""
    if not 0 <= fixed_index < template.K:
        raise PoolError(f"fixed_index {fixed_index} outside [0, {template.K})")
    if not pool.box_lo <= fixed_value <= pool.box_hi:
        raise PoolError(f"fixed_value {fixed_value} outside the box")
    total = template.coefficients[fixed_index] * fixed_value
    for k, a in enumerate(template.coefficients):
        if k != fixed_index:
            total += _endpoint_min(a, pool.box_lo, pool.box_hi)
    return total


@dataclass(frozen=True)
class ConditionAResult:
    holds: bool
    witness: Optional[tuple] = None  # (template index, coordinate, value)


def check_condition_a(pool: Pool) -> ConditionAResult:
    # box_min_partial is affine in z, so checking both endpoints covers the box
    for r, t in enumerate(pool.templates):
        for k in range(pool.K):
            for z in (pool.box_lo, pool.box_hi):
                if box_min_partial(t, k, z, pool) > t.rhs:
                    return ConditionAResult(False, (r, k, z))
    return ConditionAResult(True)


@dataclass(frozen=True)
class ConditionBResult:
    holds: bool
    failing_cube: Optional[tuple] = None
    worst_deviation: Optional[Real] = None


def _grid_cells(pool: Pool, l: int) -> int:
    span = (pool.box_hi - pool.box_lo) * l
    cells = round(span)
    if isinstance(span, Fraction):
        aligned = span.denominator == 1
    else:
        aligned = abs(span - cells) <= 1e-9 * max(1.0, abs(span))
    if not aligned or cells < 1:
        raise PoolError(f"box width times l={l} is not a positive integer ({span})")
    return int(cells)


def cube_deviation(template: ConstraintTemplate, cube_lo: Sequence, side) -> Real:
    """min over the cube of ``a . y - b``; each coefficient picks its cube endpoint."""
    total = -template.rhs
    for a, lo in zip(template.coefficients, cube_lo):
        total += _endpoint_min(a, lo, lo + side)
    return total


def check_condition_b(pool: Pool, l: int, nu) -> ConditionBResult:
    """Check that every grid cube of side 1/l is violated by >= nu by some template.

    Cubes start at ``box_lo``; the box width times ``l`` must be an integer.
    ``worst_deviation`` reports the smallest best-template deviation found.
    """
    if l < 1:
        raise PoolError("l must be a positive integer")
    if not nu > 0:
        raise PoolError("nu must be positive")
    cells = _grid_cells(pool, l)
    side = Fraction(1, l) if isinstance(pool.box_lo, (int, Fraction)) else 1.0 / l
    worst = None
    failing = None
    for idx in itertools.product(range(cells), repeat=pool.K):
        cube_lo = [pool.box_lo + i * side for i in idx]
        best = max(cube_deviation(t, cube_lo, side) for t in pool.templates)
        if worst is None or best < worst:
            worst = best
        if best < nu and failing is None:
            failing = idx
    return ConditionBResult(failing is None, failing, worst)


def b_psi(pool: Pool):
    """Tight bound on any optimal slack: worst template excess over the box plus B_w."""
    worst = max(
        sum(_endpoint_max(a, pool.box_lo, pool.box_hi) for a in t.coefficients) - t.rhs
        for t in pool.templates
    )
    return max(worst + pool.B_w, 0)


def b_psi_printed(pool: Pool):
    """The looser bound ``max_r sum_k (|lo|+|hi|) K |a_rk| + |b_r|`` (no weight term)."""
    span = abs(pool.box_lo) + abs(pool.box_hi)
    return max(
        sum(span * pool.K * abs(a) for a in t.coefficients) + abs(t.rhs)
        for t in pool.templates
    )


# ---------------------------------------------------------------- file format

def _parse_num(text: str) -> Fraction:
    return Fraction(text.strip())


def _num(v) -> str:
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return str(v.numerator)
        as_float = float(v)
        if Fraction(as_float) == v:
            return repr(as_float)
        return f"{v.numerator}/{v.denominator}"
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def parse_pool(text: str) -> Pool:
    header = None
    templates = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] == "POOL":
            if header is not None:
                raise PoolError(f"line {lineno}: duplicate POOL header")
            header = {}
            for tok in tokens[1:]:
                if "=" not in tok:
                    raise PoolError(f"line {lineno}: malformed header field {tok!r}")
                key, val = tok.split("=", 1)
                header[key] = val
        elif tokens[0] == "T":
            if header is None:
                raise PoolError(f"line {lineno}: template before POOL header")
            try:
                nums = [_parse_num(t) for t in tokens[1:]]
            except ValueError as exc:
                raise PoolError(f"line {lineno}: {exc}") from exc
            if len(nums) < 2:
                raise PoolError(f"line {lineno}: template needs coefficients and rhs")
            templates.append(ConstraintTemplate(tuple(nums[:-1]), nums[-1]))
        else:
            raise PoolError(f"line {lineno}: unknown record {tokens[0]!r}")
    if header is None:
        raise PoolError("missing POOL header")
    missing = [k for k in ("K", "BOX") if k not in header]
    if missing:
        raise PoolError(f"POOL header missing {', '.join(missing)}")
    unknown = set(header) - {"K", "BOX", "WX", "WPSI", "WDIST"}
    if unknown:
        raise PoolError(f"unknown POOL header fields {sorted(unknown)}")
    try:
        K = int(header["K"])
        lo, hi = (_parse_num(v) for v in header["BOX"].split(","))
        w_x = _parse_num(header.get("WX", "0"))
        w_psi = _parse_num(header.get("WPSI", "1"))
    except ValueError as exc:
        raise PoolError(f"malformed POOL header: {exc}") from exc
    wdist = WeightDistSpec.from_string(header.get("WDIST", "constant(0)"))
    return Pool(K, tuple(templates), lo, hi, wdist, w_x, w_psi)


def format_pool(pool: Pool) -> str:
    lines = [
        f"POOL K={pool.K} BOX={_num(pool.box_lo)},{_num(pool.box_hi)} "
        f"WX={_num(pool.w_x)} WPSI={_num(pool.w_psi)} WDIST={pool.weight_dist.to_string()}"
    ]
    for t in pool.templates:
        lines.append("T " + " ".join(_num(v) for v in t.coefficients + (t.rhs,)))
    return "\n".join(lines) + "\n"


def load_pool(path) -> Pool:
    return parse_pool(Path(path).read_text())


def save_pool(pool: Pool, path) -> None:
    Path(path).write_text(format_pool(pool))
