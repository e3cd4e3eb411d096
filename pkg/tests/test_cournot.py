import random
from fractions import Fraction as F

import pytest

from conftest import direct_cost
from splitgame import (
    Firm,
    Oligopoly,
    OligopolyError,
    PriceFunction,
    Profile,
    SimplexPolymatroid,
    firm_utility,
    game_lipschitz,
    map_strategy,
    solve_cournot,
    to_congestion_game,
    unmap_strategy,
)


def monopoly(cost=0.0, a=10, b=1):
    return Oligopoly(("m1",), (Firm(("m1",), cost, {"m1": PriceFunction.affine(a, b)}, "A"),))


def duopoly(cost=0.0):
    price = PriceFunction.affine(10, 1)
    return Oligopoly(("m1",), (Firm(("m1",), cost, {"m1": price}, "A"),
                               Firm(("m1",), cost, {"m1": price}, "B")))


def two_market_firm():
    prices = {"m1": PriceFunction.affine(3, 1), "m2": PriceFunction.affine(14, 2)}
    return Oligopoly(("m1", "m2"), (Firm(("m1", "m2"), 0.5, prices, "A"),))


def mixed_market(rng):
    """Three markets, two firms with overlapping access and mixed price shapes."""
    markets = ("m1", "m2", "m3")
    firms = []
    for name, access in (("A", ("m1", "m2")), ("B", ("m2", "m3"))):
        prices = {}
        for e in access:
            if rng.random() < 0.5:
                prices[e] = PriceFunction.affine(rng.randint(2, 12), rng.choice([1, 2, 0.5]))
            else:
                prices[e] = PriceFunction.quad(rng.randint(2, 12), rng.choice([0, 1]), rng.choice([0.25, 1]))
        firms.append(Firm(access, rng.choice([0.0, 0.5, 1.0]), prices, name))
    return Oligopoly(markets, tuple(firms))


class TestUtility:
    def test_monopoly(self):
        assert firm_utility(monopoly(), [[5]]) == [25]

    def test_zero_production(self):
        assert firm_utility(duopoly(), [[0], [0]]) == [0, 0]

    def test_cournot_duopoly(self):
        q = 10 / 3
        assert firm_utility(duopoly(), [[q], [q]]) == pytest.approx([100 / 9] * 2)

    def test_inaccessible_market(self):
        o = Oligopoly(("m1", "m2"), (Firm(("m1",), 0, {"m1": PriceFunction.affine(10, 1)}),))
        with pytest.raises(OligopolyError):
            firm_utility(o, [[1, 1]])


class TestPrices:
    def test_roots_are_exact(self):
        assert PriceFunction.affine(10, 1).root() == 10
        assert PriceFunction.affine(14, 2).root() == 7
        assert PriceFunction.quad(4, 0, 1).root() == pytest.approx(2)

    @pytest.mark.parametrize("bad", [lambda: PriceFunction.affine(0, 1), lambda: PriceFunction.affine(-3, 1),
                                     lambda: PriceFunction.affine(5, 0)])
    def test_rejects_bad_prices(self, bad):
        with pytest.raises(OligopolyError):
            bad()


class TestReduction:
    def test_monopoly_costs(self):
        g, iso = to_congestion_game(monopoly(cost=1.0))
        assert iso.demands == (10,)
        C = iso.shift
        assert C == 20  # max(p(0) = 10, 2 c d = 20)
        market, slack = g.costs[0]
        for t in (0.0, 3.5, 10.0):
            assert market(t) == pytest.approx(C - (10 - t))
            assert slack(t) == pytest.approx(C + (t - 20))

    def test_two_markets_sum_roots(self):
        _, iso = to_congestion_game(two_market_firm())
        assert iso.demands == (10,)

    def test_duopoly_strategy_spaces(self):
        g, iso = to_congestion_game(duopoly())
        assert g.resources == ("m1", "A/slack", "B/slack")
        for i, player in enumerate(g.players):
            p = player.polymatroid
            assert isinstance(p, SimplexPolymatroid)
            assert p.allowed == frozenset({"m1", g.resources[iso.slack[i]]})
            assert p.rank(p.ground) == 10 == player.demand

    def test_costs_are_admissible(self):
        rng = random.Random(73)
        for _ in range(30):
            g, _ = to_congestion_game(mixed_market(rng))
            for row in g.costs:
                for c in row:
                    assert all(a >= 0 for a in c.coeffs)
            assert game_lipschitz(g) >= 0

    def test_nonpositive_root_rejected(self):
        with pytest.raises(OligopolyError):
            monopoly(a=0)


class TestStrategyMap:
    def test_zero_quantities(self):
        _, iso = to_congestion_game(monopoly())
        assert map_strategy(iso, 0, [F(0)]) == (0, 10)

    def test_slack_fill(self):
        _, iso = to_congestion_game(monopoly())
        assert map_strategy(iso, 0, [F(5, 2)]) == (F(5, 2), F(15, 2))

    def test_over_capacity(self):
        _, iso = to_congestion_game(monopoly())
        with pytest.raises(OligopolyError):
            map_strategy(iso, 0, [F(11)])

    def test_round_trip(self):
        rng = random.Random(79)
        o = two_market_firm()
        _, iso = to_congestion_game(o)
        for _ in range(100):
            q = (F(rng.randint(0, 20), 4), F(rng.randint(0, 20), 4))
            assert unmap_strategy(iso, 0, map_strategy(iso, 0, q)) == q


def random_quantities(rng, o, iso):
    rows = []
    for i, firm in enumerate(o.firms):
        budget = float(iso.demands[i])
        row = [0.0] * len(o.markets)
        for e in firm.markets:
            row[o.market_index(e)] = rng.uniform(0, budget / len(firm.markets))
        rows.append(row)
    return rows


def test_isomorphism_constancy():
    """u_i(x) + pi_i(phi(x)) does not depend on x."""
    rng = random.Random(83)
    for _ in range(5):
        o = mixed_market(rng)
        g, iso = to_congestion_game(o)
        for _ in range(100):
            q = random_quantities(rng, o, iso)
            loads = [map_strategy(iso, i, row) for i, row in enumerate(q)]
            u = firm_utility(o, q)
            for i in range(len(o.firms)):
                total = u[i] + direct_cost(g, loads, i)
                assert abs(total - iso.constants[i]) <= 1e-9 * max(1.0, abs(iso.constants[i]))


def test_best_replies_transfer():
    """Grid maximizer of u_i equals the grid minimizer of pi_i after mapping."""
    o = duopoly(cost=0.5)
    g, iso = to_congestion_game(o)
    rival = 3.0
    grid = [j / 100 for j in range(0, 1001)]
    best_u = max(grid, key=lambda q: firm_utility(o, [[q], [rival]])[0])
    rival_loads = map_strategy(iso, 1, [rival])
    best_pi = min(grid, key=lambda q: direct_cost(g, [map_strategy(iso, 0, [q]), rival_loads], 0))
    assert best_u == best_pi
    # first-order condition: 10 - 2q - rival - 2 c q = 0
    assert best_u == pytest.approx(7 / 3, abs=0.01)


class TestSolveCournot:
    def test_monopoly(self):
        quantities, cert = solve_cournot(monopoly(cost=1.0), 0.5)
        assert abs(float(quantities[0][0]) - 2.5) <= 0.25
        assert cert.max_gap <= 0.5

    def test_duopoly(self):
        quantities, cert = solve_cournot(duopoly(), 0.5)
        for row in quantities:
            assert abs(float(row[0]) - 10 / 3) <= 0.25
        assert cert.max_gap <= 0.5

    def test_profile_is_feasible(self):
        from splitgame import is_feasible

        o = monopoly(cost=1.0)
        g, iso = to_congestion_game(o)
        quantities, _ = solve_cournot(o, 0.5)
        loads = tuple(map_strategy(iso, i, q) for i, q in enumerate(quantities))
        assert is_feasible(g, Profile(loads))
