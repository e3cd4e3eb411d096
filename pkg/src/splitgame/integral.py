"""Exact equilibria of k-integral games and the epsilon -> packet size schedule.

Loads are tracked as integer packet counts; a load is ``k * count`` with
``k`` an exact Fraction.  Polymatroid constraints are checked in packet
units (every rank value is a multiple of k), so feasibility is exact.
Marginal costs are binary64 and compared with a small deadband.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

from .game import NEG_INF, Game, GameError, Profile, game_lipschitz
from .polymatroid import ExplicitPolymatroid, SimplexPolymatroid, as_fraction, rho_gcd

DEADBAND = 1e-12
ITERATION_CAP_FACTOR = 16
LIPSCHITZ_DENOMINATOR = 10**6


class NonTerminationError(RuntimeError):
    def __init__(self, message: str, profile: Profile):
        super().__init__(message)
        self.profile = profile


class InternalInconsistency(RuntimeError):
    """A guarantee that should hold by construction was observed to fail."""


@dataclass(frozen=True)
class PacketSchedule:
    epsilon: float
    k: Fraction
    rho_gcd_value: Fraction
    L: float
    delta: Fraction
    m: int
    divisor: int

    @property
    def packets_per_player(self) -> Fraction:
        """delta / k, the largest number of packets any player holds."""
        return self.delta / self.k

    def predicted_work(self, n: int) -> int:
        """n * m * (delta/k)^3, the pseudo-polynomial step estimate."""
        return n * self.m * math.ceil(self.packets_per_player) ** 3


@dataclass(frozen=True)
class EquilibriumResult:
    profile: Profile
    k: Fraction
    best_response_count: int
    demand_increments: int
    certified_local_optimal: bool


class Step(NamedTuple):
    """One step of the dynamics: a new packet (``removed`` is None) or a
    single-packet move.  ``gain`` is the mover's cost decrease; for a new
    packet it is minus the cost of placing it."""

    step: int
    player: int
    added: int
    removed: int | None
    gain: float


def game_rank_gcd(g: Game) -> Fraction:
    values = list(g.demands)
    for player in g.players:
        values.extend(player.polymatroid.rank_values())
    return rho_gcd(values)


def _rational_upper(value: float, denominator: int = LIPSCHITZ_DENOMINATOR) -> Fraction:
    return Fraction(math.ceil(Fraction(value) * denominator), denominator)


def packet_size(g: Game, epsilon: float) -> PacketSchedule:
    """k = rho_gcd / ceil(2 m^2 L delta (delta+1) / epsilon), taken exactly.

    L is rounded up to a multiple of 1e-6 first; this can only shrink k.
    """
    if not epsilon > 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    L = game_lipschitz(g)
    delta = g.delta
    base = game_rank_gcd(g)
    ratio = 2 * g.m**2 * _rational_upper(L) * delta * (delta + 1) / Fraction(epsilon)
    divisor = max(1, math.ceil(ratio))
    return PacketSchedule(
        epsilon=epsilon, k=base / divisor, rho_gcd_value=base, L=L, delta=delta, m=g.m,
        divisor=divisor,
    )


def check_packet_size(g: Game, k) -> Fraction:
    k = as_fraction(k)
    if k <= 0:
        raise GameError(f"packet size must be positive, got {k}")
    for i, player in enumerate(g.players):
        if (player.demand / k).denominator != 1:
            raise GameError(f"player {i}: packet size {k} does not divide demand {player.demand}")
        for r in player.polymatroid.rank_values():
            if (r / k).denominator != 1:
                raise GameError(f"player {i}: packet size {k} does not divide rank value {r}")
    return k


class _PacketState:
    """Mutable packet-count view of a profile used by the dynamics."""

    def __init__(self, g: Game, k: Fraction, counts):
        self.g = g
        self.k = k
        self.kf = float(k)
        self.counts = [list(row) for row in counts]
        self.agg = [sum(col) for col in zip(*self.counts)] if self.counts else []
        self._ranks = []
        for player in g.players:
            p = player.polymatroid
            if isinstance(p, ExplicitPolymatroid):
                self._ranks.append([int(p.rank_mask(mask) / k) for mask in range(1 << g.m)])
            else:
                self._ranks.append(None)
        self._slack_cache: dict[int, list[int]] = {}

    def profile(self) -> Profile:
        return Profile.from_counts(self.counts, self.k)

    def up(self, i: int, e: int) -> float:
        c = self.g.costs[i][e]
        kf = self.kf
        xie = kf * self.counts[i][e]
        xe = kf * self.agg[e]
        return (xie + kf) * c(xe + kf) - xie * c(xe)

    def down(self, i: int, e: int):
        q = self.counts[i][e]
        if q <= 0:
            return NEG_INF
        c = self.g.costs[i][e]
        kf = self.kf
        xie = kf * q
        xe = kf * self.agg[e]
        return xie * c(xe) - (xie - kf) * c(xe - kf)

    def _slack(self, i: int) -> list[int]:
        cached = self._slack_cache.get(i)
        if cached is None:
            row = self.counts[i]
            sums = [0] * (1 << self.g.m)
            for mask in range(1, len(sums)):
                low = mask & -mask
                sums[mask] = sums[mask ^ low] + row[low.bit_length() - 1]
            cached = [r - s for r, s in zip(self._ranks[i], sums)]
            self._slack_cache[i] = cached
        return cached

    def can_add(self, i: int, e: int) -> bool:
        p = self.g.players[i].polymatroid
        if isinstance(p, SimplexPolymatroid):
            return p.allows(e)
        bit = 1 << e
        return all(s >= 1 for mask, s in enumerate(self._slack(i)) if mask & bit)

    def capacity(self, i: int, e: int, f: int) -> int:
        """Packets that can move from f to e for player i."""
        q = self.counts[i][f]
        if q <= 0:
            return 0
        p = self.g.players[i].polymatroid
        if isinstance(p, SimplexPolymatroid):
            return q if p.allows(e) else 0
        bit_e, bit_f = 1 << e, 1 << f
        best = q
        for mask, s in enumerate(self._slack(i)):
            if mask & bit_e and not mask & bit_f and s < best:
                best = s
        return max(best, 0)

    def add(self, i: int, e: int) -> None:
        self.counts[i][e] += 1
        self.agg[e] += 1
        self._slack_cache.pop(i, None)

    def remove(self, i: int, e: int) -> None:
        self.counts[i][e] -= 1
        self.agg[e] -= 1
        self._slack_cache.pop(i, None)

    def move(self, i: int, e: int, f: int) -> None:
        self.add(i, e)
        self.remove(i, f)

    def cheapest_addition(self, i: int) -> tuple[int, float]:
        best_e, best_val = -1, math.inf
        for e in range(self.g.m):
            if not self.can_add(i, e):
                continue
            val = self.up(i, e)
            if val < best_val - DEADBAND or best_e < 0:
                best_e, best_val = e, val
        if best_e < 0:
            raise InternalInconsistency(f"player {i} has no feasible resource for a new packet")
        return best_e, best_val

    def first_violation(self, players=None) -> tuple[int, int, int, float] | None:
        for i in players if players is not None else range(self.g.n):
            m = self.g.m
            ups = [self.up(i, e) for e in range(m)]
            downs = [self.down(i, f) for f in range(m)]
            for e in range(m):
                for f in range(m):
                    if e == f or downs[f] is NEG_INF:
                        continue
                    if ups[e] < downs[f] - DEADBAND and self.capacity(i, e, f) > 0:
                        return i, e, f, downs[f] - ups[e]
        return None

    def best_exchange(self, i: int) -> tuple[int, int, float] | None:
        m = self.g.m
        ups = [self.up(i, e) for e in range(m)]
        downs = [self.down(i, f) for f in range(m)]
        best = None
        for e in range(m):
            for f in range(m):
                if e == f or downs[f] is NEG_INF:
                    continue
                gain = downs[f] - ups[e]
                if gain > DEADBAND and (best is None or gain > best[2]) and self.capacity(i, e, f) > 0:
                    best = (e, f, gain)
        return best


def _state_from_profile(g: Game, k: Fraction, x: Profile) -> _PacketState:
    if len(x.loads) != g.n or any(len(row) != g.m for row in x.loads):
        raise GameError("profile shape does not match game")
    counts = []
    for row in x.loads:
        out = []
        for v in row:
            q = as_fraction(v) / k if not isinstance(v, float) else None
            if q is None or q.denominator != 1 or q < 0:
                raise GameError(f"load {v} is not a nonnegative multiple of packet size {k}")
            out.append(int(q))
        counts.append(out)
    return _PacketState(g, k, counts)


def best_response_k(g: Game, k, i: int, x: Profile) -> list[Fraction]:
    """Best k-integral response of player i to the other players in ``x``.

    Packets are placed greedily by smallest marginal_up (ties to the lowest
    resource index); then the largest-gain improving single-packet exchange
    is applied until none is left.
    """
    k = as_fraction(k)
    d = g.players[i].demand
    if (d / k).denominator != 1:
        raise GameError(f"packet size {k} does not divide demand {d}")
    state = _state_from_profile(g, k, x)
    for e in range(g.m):
        while state.counts[i][e]:
            state.remove(i, e)
    for _ in range(int(d / k)):
        e, _ = state.cheapest_addition(i)
        state.add(i, e)
    cap = ITERATION_CAP_FACTOR * g.m * (int(d / k) + 1) ** 2
    for _ in range(cap):
        move = state.best_exchange(i)
        if move is None:
            return [k * q for q in state.counts[i]]
        state.move(i, move[0], move[1])
    raise NonTerminationError("exchange repair did not terminate", state.profile())


def local_violation(g: Game, k, x: Profile) -> tuple[int, int, int] | None:
    """First (player, e, f) such that moving one packet from f to e is a
    feasible strict improvement; None when ``x`` is a k-integral equilibrium."""
    k = as_fraction(k)
    hit = _state_from_profile(g, k, x).first_violation()
    return None if hit is None else hit[:3]


def solve_integral(g: Game, k, trace: list | None = None) -> EquilibriumResult:
    """Exact equilibrium of the k-integral game by incremental dynamics.

    Starting from zero demand, the lowest-index player short of its demand
    receives one packet on its cheapest feasible resource; single-packet
    improving moves are then applied until no player has one.  If ``trace``
    is a list, a :class:`Step` is appended for every placement and move.
    """
    k = check_packet_size(g, k)
    targets = [int(p.demand / k) for p in g.players]
    state = _PacketState(g, k, [[0] * g.m for _ in range(g.n)])
    total = sum(targets)
    cap = ITERATION_CAP_FACTOR * g.n * g.m * max(total, 1) ** 3
    held = [0] * g.n
    moves = increments = steps = 0
    while True:
        i = next((j for j in range(g.n) if held[j] < targets[j]), None)
        if i is None:
            break
        e, cost = state.cheapest_addition(i)
        state.add(i, e)
        held[i] += 1
        increments += 1
        steps += 1
        if trace is not None:
            trace.append(Step(steps, i, e, None, -cost))
        while True:
            hit = state.first_violation()
            if hit is None:
                break
            j, e, f, gain = hit
            state.move(j, e, f)
            moves += 1
            steps += 1
            if trace is not None:
                trace.append(Step(steps, j, e, f, gain))
            if moves > cap:
                raise NonTerminationError(
                    f"no equilibrium after {moves} moves (cap {cap})", state.profile()
                )
    profile = state.profile()
    return EquilibriumResult(
        profile=profile,
        k=k,
        best_response_count=moves,
        demand_increments=increments,
        certified_local_optimal=local_violation(g, k, profile) is None,
    )


def solve_approx(g: Game, epsilon: float, tol: float | None = None,
                 schedule: PacketSchedule | None = None, trace: list | None = None):
    """epsilon-approximate equilibrium of the continuous game.

    Returns ``(EquilibriumResult, GapCertificate)``.  The certificate is
    computed independently by continuous best responses; a gap above
    epsilon raises :class:`InternalInconsistency`.
    """
    from .verify import epsilon_gap

    if schedule is None:
        schedule = packet_size(g, epsilon)
    if tol is None:
        tol = epsilon / 100
    result = solve_integral(g, schedule.k, trace=trace)
    if not result.certified_local_optimal:
        raise InternalInconsistency("integral dynamics stopped at a non-equilibrium")
    cert = epsilon_gap(g, result.profile, tol)
    if cert.max_gap > epsilon:
        raise InternalInconsistency(
            f"certified gap {cert.max_gap:.6g} exceeds epsilon {epsilon} at k = {schedule.k}"
        )
    return result, cert
