"""Exact polymatroid machinery over a finite ground set of resources.

Two rank-oracle kinds are supported:

    SimplexPolymatroid(ground, allowed, rank)
        rho(U) = rank if U meets `allowed`, else 0.  Its base polytope of
        rank d is the scaled simplex over `allowed`.
    ExplicitPolymatroid(ground, table)
        rho given by a complete table over all subsets (m <= 20).

All rank values and demands are ``fractions.Fraction``; nothing in this
module rounds.  Load vectors are plain sequences indexed by ground-set order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Hashable, Iterable, Mapping, Sequence

MAX_EXPLICIT_RESOURCES = 20


class PolymatroidError(ValueError):
    """Invalid polymatroid data or an unsatisfiable query."""


def as_fraction(value) -> Fraction:
    """Parse ints, Fractions and "p/q" strings. Floats are refused."""
    if isinstance(value, bool):
        raise PolymatroidError(f"not a rational: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise PolymatroidError(f"malformed rational: {value!r}") from exc
    raise PolymatroidError(f"not an exact rational: {value!r}")


def powerset(items: Sequence) -> Iterable[tuple]:
    for r in range(len(items) + 1):
        yield from combinations(items, r)


@dataclass(frozen=True)
class Violation:
    """A failed polymatroid axiom, witnessed by the subsets U and V."""

    kind: str
    U: frozenset
    V: frozenset

    def __str__(self) -> str:
        u = sorted(self.U, key=str)
        v = sorted(self.V, key=str)
        return f"{self.kind} violated for U={u}, V={v}"


@dataclass(frozen=True)
class Polymatroid:
    ground: tuple[Hashable, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.ground)) != len(self.ground):
            raise PolymatroidError("ground set has duplicate resources")
        object.__setattr__(self, "_index", {r: j for j, r in enumerate(self.ground)})

    @property
    def m(self) -> int:
        return len(self.ground)

    def index(self, resource) -> int:
        try:
            return self._index[resource]
        except KeyError:
            raise PolymatroidError(f"unknown resource {resource!r}") from None

    def mask(self, subset: Iterable) -> int:
        out = 0
        for r in subset:
            out |= 1 << self.index(r)
        return out

    def subset(self, mask: int) -> frozenset:
        return frozenset(r for j, r in enumerate(self.ground) if mask >> j & 1)

    def rank(self, subset: Iterable) -> Fraction:
        return self.rank_mask(self.mask(subset))

    def rank_mask(self, mask: int) -> Fraction:
        raise NotImplementedError

    def rank_values(self) -> list[Fraction]:
        """Every distinct rank value the oracle can return."""
        raise NotImplementedError


@dataclass(frozen=True)
class SimplexPolymatroid(Polymatroid):
    allowed: frozenset = frozenset()
    rank_value: Fraction = Fraction(1)
    _allowed_mask: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        super().__post_init__()
        object.__setattr__(self, "allowed", frozenset(self.allowed))
        object.__setattr__(self, "rank_value", as_fraction(self.rank_value))
        if self.rank_value < 0:
            raise PolymatroidError("simplex rank must be nonnegative")
        object.__setattr__(self, "_allowed_mask", self.mask(self.allowed))

    def rank_mask(self, mask: int) -> Fraction:
        return self.rank_value if mask & self._allowed_mask else Fraction(0)

    def rank_values(self) -> list[Fraction]:
        return [self.rank_value] if self.allowed else []

    def allows(self, j: int) -> bool:
        return bool(self._allowed_mask >> j & 1)


@dataclass(frozen=True)
class ExplicitPolymatroid(Polymatroid):
    table: Mapping = field(default_factory=dict)
    _ranks: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        super().__post_init__()
        if self.m > MAX_EXPLICIT_RESOURCES:
            raise PolymatroidError(
                f"explicit oracles support at most {MAX_EXPLICIT_RESOURCES} resources, got {self.m}"
            )
        ranks: list[Fraction | None] = [None] * (1 << self.m)
        for key, value in self.table.items():
            ranks[self.mask(key)] = as_fraction(value)
        missing = [j for j, v in enumerate(ranks) if v is None]
        if missing:
            raise PolymatroidError(
                f"incomplete rank table: no value for {sorted(self.subset(missing[0]), key=str)}"
            )
        object.__setattr__(self, "_ranks", tuple(ranks))

    def rank_mask(self, mask: int) -> Fraction:
        return self._ranks[mask]

    def rank_values(self) -> list[Fraction]:
        return sorted(set(self._ranks))

    @classmethod
    def from_function(cls, ground: Sequence, rank_fn) -> "ExplicitPolymatroid":
        """Tabulate ``rank_fn(frozenset)`` over every subset of ``ground``."""
        table = {frozenset(s): as_fraction(rank_fn(frozenset(s))) for s in powerset(ground)}
        return cls(tuple(ground), table)


def rank(p: Polymatroid, subset: Iterable) -> Fraction:
    return p.rank(subset)


def validate(p: Polymatroid) -> Violation | None:
    """Check normalization, monotonicity and submodularity.

    Returns the first violation found, or None.  Submodularity is checked in
    its local form rho(U+a) + rho(U+b) >= rho(U+a+b) + rho(U), which is
    equivalent to the pairwise definition; the witness is (U+a, U+b).
    """
    if isinstance(p, SimplexPolymatroid):
        return None
    empty = frozenset()
    if p.rank_mask(0) != 0:
        return Violation("normalization", empty, empty)
    m = p.m
    full = (1 << m) - 1
    for mask in range(1 << m):
        r = p.rank_mask(mask)
        free = full & ~mask
        for a in range(m):
            if not free >> a & 1:
                continue
            ra = p.rank_mask(mask | 1 << a)
            if ra < r:
                return Violation("monotonicity", p.subset(mask), p.subset(mask | 1 << a))
            for b in range(a + 1, m):
                if not free >> b & 1:
                    continue
                rb = p.rank_mask(mask | 1 << b)
                if ra + rb < p.rank_mask(mask | 1 << a | 1 << b) + r:
                    return Violation(
                        "submodularity", p.subset(mask | 1 << a), p.subset(mask | 1 << b)
                    )
    return None


def _subset_sums(x: Sequence) -> list:
    sums = [0] * (1 << len(x))
    for mask in range(1, len(sums)):
        low = mask & -mask
        sums[mask] = sums[mask ^ low] + x[low.bit_length() - 1]
    return sums


def _check_vector(p: Polymatroid, x: Sequence) -> None:
    if len(x) != p.m:
        raise PolymatroidError(f"load vector has length {len(x)}, expected {p.m}")


def is_in_base(p: Polymatroid, d, x: Sequence) -> bool:
    """Exact membership of ``x`` in the base polytope of rank ``d``."""
    d = as_fraction(d)
    _check_vector(p, x)
    full = (1 << p.m) - 1
    if d > p.rank_mask(full):
        raise PolymatroidError(f"demand {d} exceeds rho(E) = {p.rank_mask(full)}")
    if any(v < 0 for v in x) or sum(x) != d:
        return False
    if isinstance(p, SimplexPolymatroid):
        return all(v == 0 or p.allows(j) for j, v in enumerate(x))
    sums = _subset_sums(x)
    return all(sums[mask] <= p.rank_mask(mask) for mask in range(1 << p.m))


def exchange_capacity(p: Polymatroid, d, x: Sequence, e, f) -> Fraction:
    """Largest alpha with x + alpha*(chi_e - chi_f) in the base polytope.

    ``e`` receives load, ``f`` gives it up.  Returns 0 when no positive
    exchange exists.
    """
    _check_vector(p, x)
    je, jf = p.index(e), p.index(f)
    if je == jf:
        raise PolymatroidError("exchange needs two distinct resources")
    xf = x[jf]
    if xf <= 0:
        return Fraction(0)
    if isinstance(p, SimplexPolymatroid):
        return xf if p.allows(je) else Fraction(0)
    sums = _subset_sums(x)
    best = xf
    bit_e, bit_f = 1 << je, 1 << jf
    for mask in range(1 << p.m):
        if mask & bit_e and not mask & bit_f:
            slack = p.rank_mask(mask) - sums[mask]
            if slack < best:
                best = slack
    return max(best, Fraction(0))


def greedy_linear_min(p: Polymatroid, d, weights: Sequence) -> list[Fraction]:
    """Vertex of the rank-``d`` base polytope minimizing sum(w_e x_e).

    Resources are taken in ascending weight (ties by index) and each gets its
    rank increment, truncated by the remaining demand.
    """
    d = as_fraction(d)
    _check_vector(p, weights)
    if d > p.rank_mask((1 << p.m) - 1):
        raise PolymatroidError(f"demand {d} exceeds rho(E)")
    x = [Fraction(0)] * p.m
    remaining = d
    mask = 0
    prev = Fraction(0)
    for j in sorted(range(p.m), key=lambda j: (weights[j], j)):
        if remaining <= 0:
            break
        mask |= 1 << j
        r = p.rank_mask(mask)
        x[j] = min(r - prev, remaining)
        remaining -= x[j]
        prev = r
    return x


def rho_gcd(values: Iterable) -> Fraction:
    """Largest rational a <= 1 such that every value is an integer multiple of a.

    With g the rational gcd of the nonzero values, the divisors of g are g/n,
    so the answer is g / ceil(g).
    """
    nums, dens = [], []
    for v in values:
        v = as_fraction(v)
        if v < 0:
            raise PolymatroidError(f"negative value {v} in rho_gcd")
        if v == 0:
            continue
        nums.append(v.numerator)
        dens.append(v.denominator)
    if not nums:
        return Fraction(1)
    g = Fraction(math.gcd(*nums), math.lcm(*dens))
    return g / math.ceil(g)
