"""JSON instance files and solver reports.

Congestion instance::

    {"version": 1, "kind": "congestion",
     "resources": ["e1", "e2"],
     "players": [
        {"demand": "1",
         "polymatroid": {"simplex": {"allowed": ["e1", "e2"], "rank": "1"}},
         "costs": {"e1": [0, 1], "e2": [0, 1]}},
        {"demand": "1/2",
         "polymatroid": {"explicit": [{"subset": [], "rank": "0"},
                                      {"subset": ["e1"], "rank": "1/2"}, ...]},
         "costs": {"e1": [1, 0, 1], "e2": [0, 2]}}]}

Cournot instance::

    {"version": 1, "kind": "cournot", "markets": ["m1"],
     "firms": [{"name": "a", "markets": ["m1"], "cost": 0,
                "prices": {"m1": {"affine": [10, 1]}}}]}

Rationals are "p/q" strings (integers are also accepted); floats appear only
in cost and price coefficients.
"""

from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path
from typing import Annotated, Literal

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError

from .cournot import Firm, Oligopoly, OligopolyError, PriceFunction
from .game import CostFunction, Game, GameError, Player, Profile
from .polymatroid import ExplicitPolymatroid, PolymatroidError, SimplexPolymatroid

FORMAT_VERSION = 1


class InstanceError(ValueError):
    """Malformed or invalid instance; the message names the offending field."""


def _rational(v) -> str:
    if isinstance(v, bool) or not isinstance(v, (str, int)):
        raise ValueError("rationals must be strings like '3/4' or integers")
    try:
        Fraction(v)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"malformed rational {v!r}") from None
    return str(v)


Rational = Annotated[str, BeforeValidator(_rational)]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class _Simplex(_Strict):
    allowed: list[str]
    rank: Rational


class _Entry(_Strict):
    subset: list[str]
    rank: Rational


class _PolySpec(_Strict):
    simplex: _Simplex | None = None
    explicit: list[_Entry] | None = None


class _PlayerSpec(_Strict):
    demand: Rational
    polymatroid: _PolySpec
    costs: dict[str, list[float]]


class _CongestionSpec(_Strict):
    version: Literal[1]
    kind: Literal["congestion"]
    resources: list[str]
    players: list[_PlayerSpec]


class _PriceSpec(_Strict):
    affine: tuple[float, float] | None = None
    quad: tuple[float, float, float] | None = None


class _FirmSpec(_Strict):
    name: str = ""
    markets: list[str]
    cost: float = Field(ge=0)
    prices: dict[str, _PriceSpec]


class _CournotSpec(_Strict):
    version: Literal[1]
    kind: Literal["cournot"]
    markets: list[str]
    firms: list[_FirmSpec]


def _loc(err: ValidationError) -> str:
    first = err.errors()[0]
    path = ".".join(str(p) for p in first["loc"])
    return f"{path}: {first['msg']}"


def _build_game(spec: _CongestionSpec) -> Game:
    resources = tuple(spec.resources)
    if len(set(resources)) != len(resources):
        raise InstanceError("resources: duplicate names")
    players, costs = [], []
    for i, ps in enumerate(spec.players):
        where = f"players.{i}"
        try:
            poly = ps.polymatroid
            if (poly.simplex is None) == (poly.explicit is None):
                raise InstanceError(f"{where}.polymatroid: give exactly one of 'simplex' or 'explicit'")
            if poly.simplex is not None:
                p = SimplexPolymatroid(resources, frozenset(poly.simplex.allowed), Fraction(poly.simplex.rank))
            else:
                table = {}
                for j, entry in enumerate(poly.explicit):
                    key = frozenset(entry.subset)
                    if key in table:
                        raise InstanceError(f"{where}.polymatroid.explicit.{j}: duplicate subset")
                    table[key] = Fraction(entry.rank)
                p = ExplicitPolymatroid(resources, table)
        except PolymatroidError as exc:
            raise InstanceError(f"{where}.polymatroid: {exc}") from None
        unknown = set(ps.costs) - set(resources)
        if unknown:
            raise InstanceError(f"{where}.costs: unknown resource {sorted(unknown)[0]!r}")
        row = []
        for e in resources:
            try:
                row.append(CostFunction(tuple(ps.costs.get(e, [0.0]))))
            except GameError as exc:
                raise InstanceError(f"{where}.costs.{e}: {exc}") from None
        players.append(Player(Fraction(ps.demand), p))
        costs.append(tuple(row))
    try:
        return Game(resources, tuple(players), tuple(costs))
    except (GameError, PolymatroidError) as exc:
        raise InstanceError(f"players: {exc}") from None


def _build_oligopoly(spec: _CournotSpec) -> Oligopoly:
    firms = []
    for i, fs in enumerate(spec.firms):
        where = f"firms.{i}"
        prices = {}
        for e, ps in fs.prices.items():
            try:
                if (ps.affine is None) == (ps.quad is None):
                    raise InstanceError(f"{where}.prices.{e}: give exactly one of 'affine' or 'quad'")
                prices[e] = PriceFunction.affine(*ps.affine) if ps.affine else PriceFunction.quad(*ps.quad)
            except OligopolyError as exc:
                raise InstanceError(f"{where}.prices.{e}: {exc}") from None
        try:
            firms.append(Firm(tuple(fs.markets), fs.cost, prices, fs.name or f"firm{i}"))
        except OligopolyError as exc:
            raise InstanceError(f"{where}: {exc}") from None
    try:
        return Oligopoly(tuple(spec.markets), tuple(firms))
    except OligopolyError as exc:
        raise InstanceError(f"firms: {exc}") from None


def load_instance(data: dict) -> Game | Oligopoly:
    if not isinstance(data, dict):
        raise InstanceError("instance must be a JSON object")
    kind = data.get("kind")
    try:
        if kind == "congestion":
            return _build_game(_CongestionSpec.model_validate(data))
        if kind == "cournot":
            return _build_oligopoly(_CournotSpec.model_validate(data))
    except ValidationError as exc:
        raise InstanceError(_loc(exc)) from None
    raise InstanceError(f"kind: expected 'congestion' or 'cournot', got {kind!r}")


def parse_instance(path) -> Game | Oligopoly:
    """Read and fully validate an instance file."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InstanceError(f"invalid JSON: {exc}") from None
    return load_instance(data)


def profile_to_json(game: Game, x: Profile) -> list[dict]:
    return [
        {r: str(Fraction(v)) if not isinstance(v, float) else v for r, v in zip(game.resources, row)}
        for row in x.loads
    ]


def profile_from_json(game: Game, rows, k=None) -> Profile:
    if not isinstance(rows, list) or len(rows) != game.n:
        raise InstanceError(f"profile: expected a list of {game.n} player load maps")
    loads = []
    for i, row in enumerate(rows):
        if not isinstance(row, dict) or set(row) - set(game.resources):
            raise InstanceError(f"profile.{i}: expected a map over the game's resources")
        vals = []
        for r in game.resources:
            v = row.get(r, "0")
            try:
                vals.append(Fraction(_rational(v)) if not isinstance(v, float) else v)
            except ValueError as exc:
                raise InstanceError(f"profile.{i}.{r}: {exc}") from None
        loads.append(tuple(vals))
    try:
        return Profile(tuple(loads), k)
    except GameError as exc:
        raise InstanceError(f"profile: {exc}") from None


def write_json(path, payload: dict) -> None:
    Path(path).write_text(dumps(payload) + "\n", encoding="utf-8")


def dumps(payload: dict) -> str:
    return json.dumps(payload, indent=2, sort_keys=True)
