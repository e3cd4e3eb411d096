"""Atomic splittable polymatroid congestion games.

Costs are polynomials with nonnegative coefficients, which makes them
nonnegative, nondecreasing, convex and differentiable on [0, inf).  Demands
and ranks are exact; cost evaluation is binary64.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .polymatroid import (
    Polymatroid,
    SimplexPolymatroid,
    _subset_sums,
    as_fraction,
    is_in_base,
    validate,
)

MAX_DEGREE = 4


class GameError(ValueError):
    """A game or profile that violates the model's invariants."""


class _NegInf:
    """Sentinel for a packet removal that is not possible.

    Compares below every real number and refuses arithmetic.
    """

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "NEG_INF"

    def __lt__(self, other):
        return other is not self

    def __le__(self, other):
        return True

    def __gt__(self, other):
        return False

    def __ge__(self, other):
        return other is self

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("NEG_INF")

    def __float__(self):
        return -math.inf


NEG_INF = _NegInf()


@dataclass(frozen=True)
class CostFunction:
    """c(t) = sum_j coeffs[j] * t**j with every coefficient >= 0."""

    coeffs: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(a) for a in self.coeffs)
        if not coeffs:
            coeffs = (0.0,)
        if len(coeffs) > MAX_DEGREE + 1:
            raise GameError(f"cost degree {len(coeffs) - 1} exceeds {MAX_DEGREE}")
        if any(not math.isfinite(a) or a < 0 for a in coeffs):
            raise GameError(f"cost coefficients must be finite and nonnegative: {coeffs}")
        object.__setattr__(self, "coeffs", coeffs)

    def __call__(self, t: float) -> float:
        out = 0.0
        for a in reversed(self.coeffs):
            out = out * t + a
        return out

    def derivative(self, t: float) -> float:
        out = 0.0
        for j in range(len(self.coeffs) - 1, 0, -1):
            out = out * t + j * self.coeffs[j]
        return out

    def second_derivative(self, t: float) -> float:
        out = 0.0
        for j in range(len(self.coeffs) - 1, 1, -1):
            out = out * t + j * (j - 1) * self.coeffs[j]
        return out

    def lipschitz_on(self, upper: float) -> float:
        """Joint Lipschitz constant of c and c' on [0, upper].

        Both derivatives are nondecreasing on [0, inf), so the maximum sits at
        the right endpoint.
        """
        return max(abs(self.derivative(upper)), abs(self.second_derivative(upper)))

    @property
    def is_affine(self) -> bool:
        return all(a == 0 for a in self.coeffs[2:])


@dataclass(frozen=True)
class Player:
    demand: Fraction
    polymatroid: Polymatroid

    def __post_init__(self):
        object.__setattr__(self, "demand", as_fraction(self.demand))


@dataclass(frozen=True)
class Game:
    """Players with demands and polymatroids over a shared ground set, plus
    one cost function per (player, resource)."""

    resources: tuple
    players: tuple[Player, ...]
    costs: tuple[tuple[CostFunction, ...], ...]
    _coeff_matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "resources", tuple(self.resources))
        object.__setattr__(self, "players", tuple(self.players))
        costs = tuple(
            tuple(c if isinstance(c, CostFunction) else CostFunction(tuple(c)) for c in row)
            for row in self.costs
        )
        object.__setattr__(self, "costs", costs)
        if len(costs) != len(self.players):
            raise GameError("need one row of cost functions per player")
        for i, (player, row) in enumerate(zip(self.players, costs)):
            if tuple(player.polymatroid.ground) != self.resources:
                raise GameError(f"player {i}: polymatroid ground set differs from game resources")
            if len(row) != self.m:
                raise GameError(f"player {i}: expected {self.m} cost functions, got {len(row)}")
            if player.demand < 0:
                raise GameError(f"player {i}: negative demand {player.demand}")
            top = player.polymatroid.rank_mask((1 << self.m) - 1)
            if player.demand > top:
                raise GameError(f"player {i}: demand {player.demand} exceeds rho(E) = {top}")
            bad = validate(player.polymatroid)
            if bad is not None:
                raise GameError(f"player {i}: {bad}")
        mat = np.zeros((self.n, self.m, MAX_DEGREE + 1))
        for i, row in enumerate(costs):
            for e, c in enumerate(row):
                mat[i, e, : len(c.coeffs)] = c.coeffs
        mat.setflags(write=False)
        object.__setattr__(self, "_coeff_matrix", mat)

    @property
    def n(self) -> int:
        return len(self.players)

    @property
    def m(self) -> int:
        return len(self.resources)

    @property
    def demands(self) -> tuple[Fraction, ...]:
        return tuple(p.demand for p in self.players)

    @property
    def delta(self) -> Fraction:
        return max(self.demands, default=Fraction(0))

    @property
    def total_demand(self) -> Fraction:
        return sum(self.demands, Fraction(0))

    def cost_values(self, i: int, loads: np.ndarray) -> np.ndarray:
        """c_{i,e}(loads[e]) for every resource, vectorized."""
        coeffs = self._coeff_matrix[i]
        out = np.zeros_like(loads, dtype=float)
        for j in range(MAX_DEGREE, -1, -1):
            out = out * loads + coeffs[:, j]
        return out

    def cost_slopes(self, i: int, loads: np.ndarray) -> np.ndarray:
        coeffs = self._coeff_matrix[i]
        out = np.zeros_like(loads, dtype=float)
        for j in range(MAX_DEGREE, 0, -1):
            out = out * loads + j * coeffs[:, j]
        return out


@dataclass(frozen=True)
class Profile:
    """Per-player load vectors.

    In integral mode ``k`` is the packet size and every load is an exact
    multiple of it; ``counts`` gives the packet numbers.
    """

    loads: tuple[tuple, ...]
    k: Fraction | None = None

    def __post_init__(self):
        object.__setattr__(self, "loads", tuple(tuple(row) for row in self.loads))
        if self.k is not None:
            k = as_fraction(self.k)
            if k <= 0:
                raise GameError("packet size must be positive")
            object.__setattr__(self, "k", k)
            for row in self.loads:
                for v in row:
                    if not isinstance(v, (int, Fraction)) or (Fraction(v) / k).denominator != 1:
                        raise GameError(f"load {v} is not a multiple of packet size {k}")

    @classmethod
    def from_counts(cls, counts: Sequence[Sequence[int]], k) -> "Profile":
        k = as_fraction(k)
        return cls(tuple(tuple(k * c for c in row) for row in counts), k)

    @classmethod
    def zeros(cls, game: Game, k=None) -> "Profile":
        return cls(tuple((Fraction(0),) * game.m for _ in range(game.n)), k)

    @property
    def integral(self) -> bool:
        return self.k is not None

    @property
    def counts(self) -> tuple[tuple[int, ...], ...]:
        if self.k is None:
            raise GameError("continuous profile has no packet counts")
        return tuple(tuple(int(Fraction(v) / self.k) for v in row) for row in self.loads)

    def as_array(self) -> np.ndarray:
        return np.array([[float(v) for v in row] for row in self.loads], dtype=float).reshape(
            len(self.loads), -1
        )

    def aggregate(self) -> tuple:
        return tuple(sum(col) for col in zip(*self.loads))

    def replace(self, i: int, x_i: Sequence) -> "Profile":
        """Profile with player i's loads swapped for ``x_i`` (continuous mode)."""
        rows = list(self.loads)
        rows[i] = tuple(x_i)
        return Profile(tuple(rows))


def _check_shape(g: Game, x: Profile) -> None:
    if len(x.loads) != g.n or any(len(row) != g.m for row in x.loads):
        raise GameError(f"profile shape does not match game ({g.n} players, {g.m} resources)")
    if any(v < 0 for row in x.loads for v in row):
        raise GameError("profile has negative loads")


def is_feasible(g: Game, x: Profile, tol: float = 1e-9) -> bool:
    """Exact base-polytope check for rational profiles; ``tol`` per
    constraint when any load is a float."""
    _check_shape(g, x)
    for player, row in zip(g.players, x.loads):
        if all(isinstance(v, (int, Fraction)) for v in row):
            if not is_in_base(player.polymatroid, player.demand, row):
                return False
            continue
        p = player.polymatroid
        vals = [float(v) for v in row]
        if abs(sum(vals) - float(player.demand)) > tol:
            return False
        if isinstance(p, SimplexPolymatroid):
            if any(v > tol and not p.allows(j) for j, v in enumerate(vals)):
                return False
            continue
        sums = _subset_sums(vals)
        if any(sums[mask] > float(p.rank_mask(mask)) + tol for mask in range(1 << g.m)):
            return False
    return True


def player_cost(g: Game, x: Profile, i: int) -> float:
    """pi_i(x) = sum_e c_{i,e}(x_e) * x_{i,e}."""
    _check_shape(g, x)
    arr = x.as_array()
    loads = arr.sum(axis=0)
    return float(np.dot(g.cost_values(i, loads), arr[i]))


def marginal(g: Game, x: Profile, i: int, e: int) -> float:
    """mu_{i,e}(x) = c(x_e) + x_{i,e} c'(x_e)."""
    c = g.costs[i][e]
    xe = float(sum(row[e] for row in x.loads))
    return c(xe) + float(x.loads[i][e]) * c.derivative(xe)


def marginal_up(g: Game, x: Profile, i: int, e: int, k) -> float:
    """Cost increase for player i from one more packet of size k on e."""
    c = g.costs[i][e]
    k = float(k)
    xe = float(sum(row[e] for row in x.loads))
    xie = float(x.loads[i][e])
    return (xie + k) * c(xe + k) - xie * c(xe)


def marginal_down(g: Game, x: Profile, i: int, e: int, k):
    """Cost decrease for player i from removing one packet from e; NEG_INF
    when player i has nothing there."""
    xie_exact = x.loads[i][e]
    if xie_exact <= 0:
        return NEG_INF
    c = g.costs[i][e]
    k = float(k)
    xe = float(sum(row[e] for row in x.loads))
    xie = float(xie_exact)
    return xie * c(xe) - (xie - k) * c(xe - k)


def game_lipschitz(g: Game) -> float:
    """One constant bounding |c'| and |c''| of every cost on [0, D_total + 1]."""
    upper = float(g.total_demand) + 1.0
    return max((c.lipschitz_on(upper) for row in g.costs for c in row), default=0.0)
