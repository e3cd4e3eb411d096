"""Independent certification of approximate equilibria.

Continuous best responses are computed by an away-step conditional gradient
method whose linear oracle is the polymatroid greedy algorithm.  The
transshipment decomposition of a deviation y_i - x_i is solved exactly as a
max-flow problem after clearing denominators.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import networkx as nx
import numpy as np

from .game import Game, Profile, player_cost
from .integral import InternalInconsistency
from .polymatroid import Polymatroid, as_fraction, exchange_capacity, greedy_linear_min

MAX_ITERATIONS = 10**5
LINE_SEARCH_STEPS = 60


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, gap: float):
        super().__init__(message)
        self.gap = gap


@dataclass(frozen=True)
class GapCertificate:
    """Per-player gains pi_i(x) - pi_i(y_i*, x_-i) with their witnesses.

    ``x`` is a (max_gap + n*tol)-approximate equilibrium.
    """

    gaps: tuple[float, ...]
    witnesses: tuple[tuple[float, ...], ...]
    tol: float

    @property
    def max_gap(self) -> float:
        return max(self.gaps, default=0.0)


@dataclass(frozen=True)
class Transshipment:
    sources: tuple[int, ...]
    sinks: tuple[int, ...]
    flows: dict
    capacities: dict


class _PlayerObjective:
    """y -> pi_i(y, x_-i) and its gradient for fixed opponents."""

    def __init__(self, g: Game, i: int, others: np.ndarray):
        self.g, self.i, self.others = g, i, others

    def value(self, y: np.ndarray) -> float:
        return float(np.dot(self.g.cost_values(self.i, self.others + y), y))

    def grad(self, y: np.ndarray) -> np.ndarray:
        loads = self.others + y
        return self.g.cost_values(self.i, loads) + y * self.g.cost_slopes(self.i, loads)


def _line_search(obj: _PlayerObjective, y: np.ndarray, direction: np.ndarray, gmax: float) -> float:
    def slope(gamma):
        return float(np.dot(obj.grad(y + gamma * direction), direction))

    if slope(gmax) <= 0:
        return gmax
    lo, hi = 0.0, gmax
    for _ in range(LINE_SEARCH_STEPS):
        mid = 0.5 * (lo + hi)
        if slope(mid) > 0:
            hi = mid
        else:
            lo = mid
    return lo


def continuous_best_response(g: Game, i: int, x: Profile, tol: float,
                             max_iter: int = MAX_ITERATIONS) -> np.ndarray:
    """Minimize y -> pi_i(y, x_-i) over player i's base polytope.

    Starts from x_i and stops once the Frank-Wolfe duality gap is at most
    ``tol``, so the returned value is within ``tol`` of the minimum.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    player = g.players[i]
    arr = x.as_array()
    y = arr[i].copy()
    if player.demand == 0:
        return np.zeros(g.m)
    if abs(float(y.sum()) - float(player.demand)) > 1e-9:
        raise ValueError(f"player {i}'s load does not sum to the demand")
    obj = _PlayerObjective(g, i, arr.sum(axis=0) - arr[i])
    p, d = player.polymatroid, player.demand

    def lmo(w):
        return np.array([float(v) for v in greedy_linear_min(p, d, w.tolist())])

    atoms = {tuple(y): 1.0}
    gap = math.inf
    for _ in range(max_iter):
        grad = obj.grad(y)
        s = lmo(grad)
        gap = float(np.dot(grad, y - s))
        if gap <= tol:
            # convex combinations may leave -1e-17 style roundoff on empty resources
            return np.maximum(y, 0.0)
        away_key = max(atoms, key=lambda a: float(np.dot(grad, a)))
        v = np.array(away_key)
        away_gain = float(np.dot(grad, v - y))
        if gap >= away_gain or atoms[away_key] >= 1.0:
            direction, gmax, toward = s - y, 1.0, True
        else:
            alpha = atoms[away_key]
            direction, gmax, toward = y - v, alpha / (1.0 - alpha), False
        gamma = _line_search(obj, y, direction, gmax)
        y = y + gamma * direction
        if toward:
            key = tuple(s)
            if gamma >= 1.0:
                atoms = {key: 1.0}
            else:
                atoms = {a: w * (1 - gamma) for a, w in atoms.items()}
                atoms[key] = atoms.get(key, 0.0) + gamma
        else:
            atoms = {a: w * (1 + gamma) for a, w in atoms.items()}
            atoms[away_key] -= gamma
            if gamma >= gmax or atoms[away_key] <= 1e-15:
                atoms.pop(away_key)
        atoms = {a: w for a, w in atoms.items() if w > 0}
    raise ConvergenceError(f"no convergence in {max_iter} iterations (gap {gap:.3g})", gap)


def epsilon_gap(g: Game, x: Profile, tol: float) -> GapCertificate:
    """How much each player could gain by deviating, within ``tol``."""
    gaps, witnesses = [], []
    for i in range(g.n):
        y = continuous_best_response(g, i, x, tol)
        gain = player_cost(g, x, i) - player_cost(g, x.replace(i, tuple(float(v) for v in y)), i)
        if abs(gain) <= tol:
            gain = max(gain, 0.0)
        gaps.append(gain)
        witnesses.append(tuple(float(v) for v in y))
    return GapCertificate(tuple(gaps), tuple(witnesses), tol)


def transshipment(p: Polymatroid, d, x: Sequence, y: Sequence) -> Transshipment:
    """Flow from over-loaded resources of x to under-loaded ones that turns
    x into y, within the exchange capacities at x."""
    d = as_fraction(d)
    x = [as_fraction(v) for v in x]
    y = [as_fraction(v) for v in y]
    sources = tuple(e for e in range(p.m) if x[e] > y[e])
    sinks = tuple(f for f in range(p.m) if y[f] > x[f])
    caps = {
        (e, f): exchange_capacity(p, d, x, p.ground[f], p.ground[e])
        for e in sources
        for f in sinks
    }
    if not sources:
        return Transshipment(sources, sinks, {}, caps)
    values = [x[e] - y[e] for e in sources] + [y[f] - x[f] for f in sinks] + list(caps.values())
    scale = math.lcm(*(v.denominator for v in values))
    graph = nx.DiGraph()
    for e in sources:
        graph.add_edge("s", ("out", e), capacity=int((x[e] - y[e]) * scale))
    for f in sinks:
        graph.add_edge(("in", f), "t", capacity=int((y[f] - x[f]) * scale))
    for (e, f), c in caps.items():
        if c > 0:
            graph.add_edge(("out", e), ("in", f), capacity=int(c * scale))
    value, flow = nx.maximum_flow(graph, "s", "t", flow_func=nx.algorithms.flow.edmonds_karp)
    supply = sum(x[e] - y[e] for e in sources)
    if Fraction(value, scale) != supply:
        raise InternalInconsistency(
            f"no feasible transshipment: flow {Fraction(value, scale)} < supply {supply}"
        )
    flows = {
        (e, f): Fraction(flow[("out", e)][("in", f)], scale)
        for (e, f), c in caps.items()
        if c > 0
    }
    return Transshipment(sources, sinks, flows, caps)


def gradient_decomposition(g: Game, x: Profile, i: int, y_i: Sequence) -> tuple[float, float]:
    """Directional derivative of pi_i toward y_i, computed directly and via
    the transshipment sum of marginal-cost differences."""
    arr = x.as_array()
    loads = arr.sum(axis=0)
    mu = g.cost_values(i, loads) + arr[i] * g.cost_slopes(i, loads)
    diff = np.array([float(as_fraction(b) - as_fraction(a)) for a, b in zip(x.loads[i], y_i)])
    lhs = float(np.dot(mu, diff))
    player = g.players[i]
    t = transshipment(player.polymatroid, player.demand, x.loads[i], y_i)
    rhs = sum((mu[f] - mu[e]) * float(amount) for (e, f), amount in t.flows.items())
    return lhs, float(rhs)
