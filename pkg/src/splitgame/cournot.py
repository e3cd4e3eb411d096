"""Multimarket Cournot oligopolies and their congestion-game form.

Each firm i sells on markets E_i at firm-specific concave, non-increasing
prices and pays c_i * (total output)^2.  The reduction gives firm i a
player with demand d_i >= sum of its price roots, a private slack resource
e_i absorbing unsold capacity, and costs

    C - p_{i,e}(t)          on its markets,
    C + c_i * (t - 2 d_i)   on e_i,

so that u_i(x) + pi_i(phi(x)) = C d_i - c_i d_i^2 for every profile.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .game import CostFunction, Game, Player
from .integral import PacketSchedule, solve_approx
from .polymatroid import SimplexPolymatroid
from .verify import GapCertificate

DEMAND_GRID = 4


class OligopolyError(ValueError):
    pass


@dataclass(frozen=True)
class PriceFunction:
    """p(t) = a - b t (affine) or a - b t - c t^2 (quad)."""

    kind: str
    a: float
    b: float
    c: float = 0.0

    def __post_init__(self):
        if self.kind not in ("affine", "quad"):
            raise OligopolyError(f"unknown price kind {self.kind!r}")
        if not all(math.isfinite(v) for v in (self.a, self.b, self.c)):
            raise OligopolyError("price coefficients must be finite")
        if self.kind == "affine" and (self.c != 0 or self.b <= 0):
            raise OligopolyError("affine price needs b > 0")
        if self.b < 0 or self.c < 0 or (self.b == 0 and self.c == 0):
            raise OligopolyError("price must be strictly decreasing: need b, c >= 0, not both 0")
        if self.a <= 0:
            raise OligopolyError(f"price root must be positive (p(0) = {self.a})")

    @classmethod
    def affine(cls, a: float, b: float) -> "PriceFunction":
        return cls("affine", float(a), float(b))

    @classmethod
    def quad(cls, a: float, b: float, c: float) -> "PriceFunction":
        return cls("quad", float(a), float(b), float(c))

    def __call__(self, t: float) -> float:
        return self.a - self.b * t - self.c * t * t

    def derivative(self, t: float) -> float:
        return -self.b - 2 * self.c * t

    def root(self) -> Fraction:
        """Largest t with p(t) = 0, exact when the price is affine."""
        if self.c == 0:
            return Fraction(self.a) / Fraction(self.b)
        disc = self.b * self.b + 4 * self.a * self.c
        return Fraction((-self.b + math.sqrt(disc)) / (2 * self.c))

    def as_cost(self, shift: float) -> CostFunction:
        return CostFunction((shift - self.a, self.b, self.c))


@dataclass(frozen=True)
class Firm:
    markets: tuple
    cost: float
    prices: Mapping
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "markets", tuple(self.markets))
        if not self.markets:
            raise OligopolyError(f"firm {self.name!r} has no markets")
        if not (math.isfinite(self.cost) and self.cost >= 0):
            raise OligopolyError(f"firm {self.name!r}: production cost must be >= 0")
        if set(self.prices) != set(self.markets):
            raise OligopolyError(f"firm {self.name!r}: need exactly one price per accessible market")


@dataclass(frozen=True)
class Oligopoly:
    markets: tuple
    firms: tuple[Firm, ...]
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "markets", tuple(self.markets))
        object.__setattr__(self, "firms", tuple(self.firms))
        if len(set(self.markets)) != len(self.markets):
            raise OligopolyError("duplicate market names")
        object.__setattr__(self, "_index", {e: j for j, e in enumerate(self.markets)})
        for firm in self.firms:
            for e in firm.markets:
                if e not in self._index:
                    raise OligopolyError(f"firm {firm.name!r}: unknown market {e!r}")

    def market_index(self, e) -> int:
        return self._index[e]


@dataclass(frozen=True)
class IsomorphismMap:
    """phi_i: market quantities -> base-polytope point with a slack coordinate."""

    markets: tuple[int, ...]
    slack: tuple[int, ...]
    demands: tuple[Fraction, ...]
    constants: tuple[float, ...]
    resources: tuple
    shift: float


def firm_utility(o: Oligopoly, x: Sequence[Sequence[float]]) -> list[float]:
    """u_i(x) for every firm; ``x[i]`` lists quantities in market order."""
    if len(x) != len(o.firms):
        raise OligopolyError("need one quantity vector per firm")
    totals = [0.0] * len(o.markets)
    for i, (firm, row) in enumerate(zip(o.firms, x)):
        if len(row) != len(o.markets):
            raise OligopolyError(f"firm {i}: expected {len(o.markets)} quantities")
        allowed = {o.market_index(e) for e in firm.markets}
        for j, q in enumerate(row):
            if q < 0:
                raise OligopolyError(f"firm {i}: negative quantity on {o.markets[j]!r}")
            if q and j not in allowed:
                raise OligopolyError(f"firm {i}: production on inaccessible market {o.markets[j]!r}")
            totals[j] += float(q)
    out = []
    for firm, row in zip(o.firms, x):
        revenue = sum(
            firm.prices[e](totals[o.market_index(e)]) * float(row[o.market_index(e)])
            for e in firm.markets
        )
        produced = sum(float(row[o.market_index(e)]) for e in firm.markets)
        out.append(revenue - firm.cost * produced**2)
    return out


def _slack_name(o: Oligopoly, i: int) -> str:
    base = o.firms[i].name or f"firm{i}"
    name = f"{base}/slack"
    while name in o.markets:
        name += "'"
    return name


def to_congestion_game(o: Oligopoly) -> tuple[Game, IsomorphismMap]:
    n, m = len(o.firms), len(o.markets)
    demands = []
    for firm in o.firms:
        total = sum((firm.prices[e].root() for e in firm.markets), Fraction(0))
        demands.append(Fraction(math.ceil(total * DEMAND_GRID), DEMAND_GRID))
    shift = max(
        max(
            max(firm.prices[e](0.0) for e in firm.markets),
            2 * firm.cost * float(d),
        )
        for firm, d in zip(o.firms, demands)
    )
    resources = tuple(o.markets) + tuple(_slack_name(o, i) for i in range(n))
    players, costs = [], []
    for i, (firm, d) in enumerate(zip(o.firms, demands)):
        slack = m + i
        allowed = {resources[o.market_index(e)] for e in firm.markets} | {resources[slack]}
        players.append(Player(d, SimplexPolymatroid(resources, allowed, d)))
        row = [CostFunction((0.0,))] * len(resources)
        for e in firm.markets:
            row[o.market_index(e)] = firm.prices[e].as_cost(shift)
        row[slack] = CostFunction((shift - 2 * firm.cost * float(d), firm.cost))
        costs.append(tuple(row))
    game = Game(resources, tuple(players), tuple(costs))
    iso = IsomorphismMap(
        markets=tuple(range(m)),
        slack=tuple(range(m, m + n)),
        demands=tuple(demands),
        constants=tuple(shift * float(d) - f.cost * float(d) ** 2 for f, d in zip(o.firms, demands)),
        resources=resources,
        shift=shift,
    )
    return game, iso


def map_strategy(iso: IsomorphismMap, i: int, quantities: Sequence) -> tuple:
    """Market quantities of firm i -> load vector with the slack filled in."""
    if len(quantities) != len(iso.markets):
        raise OligopolyError(f"expected {len(iso.markets)} market quantities")
    d = iso.demands[i]
    exact = all(isinstance(q, (int, Fraction)) for q in quantities)
    zero, cap = (Fraction(0), d) if exact else (0.0, float(d))
    slack_room = 0 if exact else 1e-12 * cap
    produced = sum(quantities, zero)
    if produced > cap + slack_room:
        raise OligopolyError(f"firm {i} produces {produced} > cap {d}")
    if any(q < 0 for q in quantities):
        raise OligopolyError(f"firm {i}: negative quantity")
    loads = [zero] * len(iso.resources)
    for j, q in zip(iso.markets, quantities):
        loads[j] = q
    loads[iso.slack[i]] = max(cap - produced, zero)
    return tuple(loads)


def unmap_strategy(iso: IsomorphismMap, i: int, loads: Sequence) -> tuple:
    if len(loads) != len(iso.resources):
        raise OligopolyError(f"expected {len(iso.resources)} loads")
    return tuple(loads[j] for j in iso.markets)


def solve_cournot(o: Oligopoly, epsilon: float, tol: float | None = None,
                  schedule: PacketSchedule | None = None):
    """epsilon-approximate Cournot equilibrium.

    Returns ``(quantities, certificate)`` where ``quantities[i]`` is firm i's
    exact output per market.  Gaps are utility gains, since u_i and -pi_i
    differ by a constant.
    """
    game, iso = to_congestion_game(o)
    result, cert = solve_approx(game, epsilon, tol=tol, schedule=schedule)
    quantities = [unmap_strategy(iso, i, row) for i, row in enumerate(result.profile.loads)]
    return quantities, cert
