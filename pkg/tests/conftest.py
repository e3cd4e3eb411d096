"""Shared builders and brute-force oracles for the test suite.

Oracles here deliberately avoid the library's own algorithms: they
enumerate subsets, orderings and integral profiles directly.
"""

import itertools
import random
from fractions import Fraction

import pytest

from splitgame import ExplicitPolymatroid, Game, Player, Profile, SimplexPolymatroid


def simplex_game(costs, demands, resources=None, ranks=None):
    """Game where every player may use every resource (singleton game)."""
    m = len(costs[0])
    resources = tuple(resources or (f"e{j + 1}" for j in range(m)))
    ranks = ranks or demands
    players = [
        Player(Fraction(d), SimplexPolymatroid(resources, frozenset(resources), Fraction(r)))
        for d, r in zip(demands, ranks)
    ]
    return Game(resources, players, costs)


def coverage_polymatroid(resources, sets_and_weights):
    """rho(U) = sum of w_j over the sets S_j that U meets: monotone submodular."""
    def rank(U):
        return sum((w for S, w in sets_and_weights if U & S), Fraction(0))

    return ExplicitPolymatroid.from_function(resources, rank)


def random_polymatroid(rng: random.Random, m: int, denominators=(1, 2, 4)):
    resources = tuple(f"e{j + 1}" for j in range(m))
    sets = []
    for _ in range(rng.randint(1, 4)):
        size = rng.randint(1, m)
        S = frozenset(rng.sample(resources, size))
        q = rng.choice(denominators)
        sets.append((S, Fraction(rng.randint(1, 2 * q), q)))
    # every resource must be usable
    for r in resources:
        if not any(r in S for S, _ in sets):
            sets.append((frozenset({r}), Fraction(1, rng.choice(denominators))))
    return coverage_polymatroid(resources, sets)


def brute_submodular_violation(p):
    """First pair (U, V) with rho(U)+rho(V) < rho(U|V)+rho(U&V), by full 4^m scan."""
    subsets = [frozenset(s) for r in range(p.m + 1) for s in itertools.combinations(p.ground, r)]
    for U in subsets:
        for V in subsets:
            if p.rank(U) + p.rank(V) < p.rank(U | V) + p.rank(U & V):
                return U, V
    return None


def base_vertices(p, d):
    """All vertices of the rank-d base polytope, one per ordering of E."""
    d = Fraction(d)
    out = set()
    for order in itertools.permutations(range(p.m)):
        x = [Fraction(0)] * p.m
        chosen = set()
        prev = Fraction(0)
        for j in order:
            chosen.add(p.ground[j])
            r = min(p.rank(chosen), d)
            x[j] = r - prev
            prev = r
        out.add(tuple(x))
    return sorted(out)


def random_base_point(rng: random.Random, p, d, denominator=12):
    """Exact rational convex combination of base-polytope vertices."""
    verts = base_vertices(p, d)
    picks = [rng.choice(verts) for _ in range(3)]
    raw = [rng.randint(0, denominator) for _ in picks]
    if sum(raw) == 0:
        raw[0] = 1
    total = sum(raw)
    return [sum(Fraction(w, total) * v[j] for w, v in zip(raw, picks)) for j in range(p.m)]


def integral_strategies(p, d, k):
    """Every k-integral point of the rank-d base polytope."""
    from splitgame import is_in_base

    n_packets = int(Fraction(d) / Fraction(k))
    out = []
    for counts in itertools.product(range(n_packets + 1), repeat=p.m):
        if sum(counts) != n_packets:
            continue
        x = [Fraction(k) * c for c in counts]
        if is_in_base(p, d, x):
            out.append(tuple(x))
    return out


def direct_cost(game, loads, i):
    """pi_i straight from the definition, no library helpers."""
    total = [sum(row[e] for row in loads) for e in range(game.m)]
    return sum(
        sum(a * float(total[e]) ** j for j, a in enumerate(game.costs[i][e].coeffs))
        * float(loads[i][e])
        for e in range(game.m)
    )


def is_exact_integral_ne(game, profile, k, tol=1e-9):
    """Every unilateral k-integral deviation is weakly worse."""
    loads = [list(row) for row in profile.loads]
    for i, player in enumerate(game.players):
        current = direct_cost(game, loads, i)
        for y in integral_strategies(player.polymatroid, player.demand, k):
            trial = [list(row) for row in loads]
            trial[i] = list(y)
            if direct_cost(game, trial, i) < current - tol:
                return False
    return True


@pytest.fixture
def rng():
    return random.Random(20261016)


@pytest.fixture
def symmetric_2x2():
    return simplex_game([[(0, 1), (0, 1)], [(0, 1), (0, 1)]], [1, 1])


__all__ = [
    "Profile",
    "simplex_game",
    "coverage_polymatroid",
    "random_polymatroid",
    "brute_submodular_violation",
    "base_vertices",
    "random_base_point",
    "integral_strategies",
    "direct_cost",
    "is_exact_integral_ne",
]
