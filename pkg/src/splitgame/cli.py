"""Command-line driver.

    splitgame solve    INSTANCE --epsilon E [--k K] [--budget B] [--force] [--out R] [--trace T]
    splitgame verify   INSTANCE PROFILE [--tol T]
    splitgame cournot  INSTANCE --epsilon E [--budget B] [--force] [--out R]
    splitgame validate INSTANCE
    splitgame bench    INSTANCE --k 1,1/2,1/4 [--tol T] [--out CSV]

Exit codes: 0 ok, 2 parse error, 3 infeasible input, 4 over budget,
5 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

from . import __version__
from .cournot import Oligopoly, firm_utility, to_congestion_game, unmap_strategy
from .game import Game, GameError, game_lipschitz, is_feasible
from .instance import (
    InstanceError,
    dumps,
    parse_instance,
    profile_from_json,
    profile_to_json,
    write_json,
)
from .integral import (
    InternalInconsistency,
    NonTerminationError,
    PacketSchedule,
    check_packet_size,
    game_rank_gcd,
    packet_size,
    solve_approx,
    solve_integral,
)
from .polymatroid import PolymatroidError
from .verify import ConvergenceError, epsilon_gap

EXIT_PARSE, EXIT_INFEASIBLE, EXIT_BUDGET, EXIT_INTERNAL = 2, 3, 4, 5
DEFAULT_BUDGET = 10**9


class BudgetExceeded(Exception):
    pass


def _parse_k(text: str) -> Fraction:
    try:
        k = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational: {text!r}") from None
    if k <= 0:
        raise argparse.ArgumentTypeError("packet size must be positive")
    return k


def _parse_k_list(text: str) -> list[Fraction]:
    return [_parse_k(part) for part in text.split(",") if part.strip()]


def _forced_schedule(g: Game, k: Fraction, epsilon: float | None) -> PacketSchedule:
    k = check_packet_size(g, k)
    return PacketSchedule(
        epsilon=epsilon or 0.0, k=k, rho_gcd_value=game_rank_gcd(g), L=game_lipschitz(g),
        delta=g.delta, m=g.m, divisor=0,
    )


def _schedule(g: Game, args) -> PacketSchedule:
    if args.k is not None:
        return _forced_schedule(g, args.k, args.epsilon)
    if args.epsilon is None:
        raise InstanceError("--epsilon is required unless --k is given")
    return packet_size(g, args.epsilon)


def _check_budget(g: Game, schedule: PacketSchedule, budget: int, force: bool) -> None:
    work = schedule.predicted_work(g.n)
    print(
        f"packet size k = {schedule.k}; up to {schedule.packets_per_player} packets per player; "
        f"predicted work n*m*(delta/k)^3 = {work:.3e}",
        file=sys.stderr,
    )
    if work > budget and not force:
        raise BudgetExceeded(f"predicted work {work:.3e} exceeds budget {budget:.3e} (use --force)")


def _tol(args) -> float:
    if args.tol is not None:
        return args.tol
    return args.epsilon / 100 if args.epsilon else 1e-3


def _run_game(g: Game, schedule: PacketSchedule, args, trace: list | None):
    tol = _tol(args)
    if args.k is None:
        result, cert = solve_approx(g, args.epsilon, tol=tol, schedule=schedule, trace=trace)
    else:
        result = solve_integral(g, schedule.k, trace=trace)
        cert = epsilon_gap(g, result.profile, tol)
    return result, cert


def _report(g: Game, schedule: PacketSchedule, result, cert, args, started: float) -> dict:
    return {
        "version": 1,
        "kind": "congestion",
        "epsilon": args.epsilon,
        "k": str(schedule.k),
        "k_forced": args.k is not None,
        "L": schedule.L,
        "delta": str(schedule.delta),
        "rho_gcd": str(schedule.rho_gcd_value),
        "best_response_count": result.best_response_count,
        "demand_increments": result.demand_increments,
        "certified_local_optimal": result.certified_local_optimal,
        "profile": profile_to_json(g, result.profile),
        "gaps": list(cert.gaps),
        "max_gap": cert.max_gap,
        "tol": cert.tol,
        "witnesses": [dict(zip(g.resources, w)) for w in cert.witnesses],
        "wall_time": round(time.perf_counter() - started, 6),
    }


def _write_trace(path, g: Game, trace) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "player", "added", "removed", "gain"])
        for s in trace:
            removed = "" if s.removed is None else g.resources[s.removed]
            writer.writerow([s.step, s.player, g.resources[s.added], removed, repr(s.gain)])


def _emit(payload: dict, out) -> None:
    if out:
        write_json(out, payload)
    else:
        print(dumps(payload))


def _load(path, kind):
    model = parse_instance(path)
    if not isinstance(model, kind):
        want = "congestion" if kind is Game else "cournot"
        raise InstanceError(f"kind: this command needs a {want!r} instance")
    return model


def cmd_solve(args) -> int:
    started = time.perf_counter()
    g = _load(args.instance, Game)
    schedule = _schedule(g, args)
    _check_budget(g, schedule, args.budget, args.force)
    trace = [] if args.trace else None
    result, cert = _run_game(g, schedule, args, trace)
    if trace is not None:
        _write_trace(args.trace, g, trace)
    _emit(_report(g, schedule, result, cert, args, started), args.out)
    return 0


def cmd_cournot(args) -> int:
    started = time.perf_counter()
    o = _load(args.instance, Oligopoly)
    g, iso = to_congestion_game(o)
    schedule = _schedule(g, args)
    _check_budget(g, schedule, args.budget, args.force)
    trace = [] if args.trace else None
    result, cert = _run_game(g, schedule, args, trace)
    if trace is not None:
        _write_trace(args.trace, g, trace)
    quantities = [unmap_strategy(iso, i, row) for i, row in enumerate(result.profile.loads)]
    report = _report(g, schedule, result, cert, args, started)
    report["kind"] = "cournot"
    report["L_prime"] = schedule.L
    report["demands"] = [str(d) for d in iso.demands]
    report["shift"] = iso.shift
    report["quantities"] = {
        firm.name: {e: str(q[o.market_index(e)]) for e in firm.markets}
        for firm, q in zip(o.firms, quantities)
    }
    report["utilities"] = firm_utility(o, [[float(v) for v in q] for q in quantities])
    report["wall_time"] = round(time.perf_counter() - started, 6)
    _emit(report, args.out)
    return 0


def cmd_verify(args) -> int:
    g = _load(args.instance, Game)
    try:
        data = json.loads(Path(args.profile).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InstanceError(f"profile: invalid JSON: {exc}") from None
    rows = data.get("profile") if isinstance(data, dict) else data
    x = profile_from_json(g, rows)
    if not is_feasible(g, x):
        raise GameError("profile is not a feasible strategy profile of this game")
    tol = args.tol
    if tol is None:
        tol = data.get("tol", 1e-3) if isinstance(data, dict) else 1e-3
    cert = epsilon_gap(g, x, tol)
    print(dumps({
        "gaps": list(cert.gaps),
        "max_gap": cert.max_gap,
        "tol": cert.tol,
        "witnesses": [dict(zip(g.resources, w)) for w in cert.witnesses],
    }))
    return 0


def cmd_validate(args) -> int:
    model = parse_instance(args.instance)
    if isinstance(model, Game):
        print(f"ok: congestion game, {model.n} players, {model.m} resources, "
              f"rho_gcd = {game_rank_gcd(model)}, L = {game_lipschitz(model):g}")
    else:
        g, _ = to_congestion_game(model)
        print(f"ok: cournot oligopoly, {len(model.firms)} firms, {len(model.markets)} markets, "
              f"reduced game L' = {game_lipschitz(g):g}")
    return 0


def cmd_bench(args) -> int:
    g = _load(args.instance, Game)
    tol = args.tol if args.tol is not None else 1e-3
    L = game_lipschitz(g)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "max_gap", "bound", "best_responses", "packets"])
    for k in args.k:
        schedule = _forced_schedule(g, k, None)
        _check_budget(g, schedule, args.budget, args.force)
        result = solve_integral(g, schedule.k)
        cert = epsilon_gap(g, result.profile, tol)
        bound = 2 * float(k) * L * float(g.delta + 1) * g.m**2 * float(g.delta)
        writer.writerow([str(k), repr(cert.max_gap), repr(bound), result.best_response_count,
                         result.demand_increments])
    if args.out:
        Path(args.out).write_text(buf.getvalue(), encoding="utf-8")
    else:
        sys.stdout.write(buf.getvalue())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="splitgame", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def solver_flags(p):
        p.add_argument("instance")
        p.add_argument("--epsilon", type=float)
        p.add_argument("--k", type=_parse_k, help="packet size override, e.g. 1/8")
        p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
        p.add_argument("--force", action="store_true")
        p.add_argument("--out")
        p.add_argument("--trace", help="CSV trace of the integral dynamics")
        p.add_argument("--tol", type=float)

    solver_flags(sub.add_parser("solve", help="approximate equilibrium of a congestion game"))
    solver_flags(sub.add_parser("cournot", help="approximate Cournot equilibrium"))

    p = sub.add_parser("verify", help="epsilon-gap certificate for a given profile")
    p.add_argument("instance")
    p.add_argument("profile", help="report or profile JSON")
    p.add_argument("--tol", type=float)

    p = sub.add_parser("validate", help="model checks only")
    p.add_argument("instance")

    p = sub.add_parser("bench", help="gap versus packet size, as CSV")
    p.add_argument("instance")
    p.add_argument("--k", type=_parse_k_list, required=True)
    p.add_argument("--tol", type=float)
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--force", action="store_true")
    p.add_argument("--out")
    return parser


COMMANDS = {
    "solve": cmd_solve,
    "cournot": cmd_cournot,
    "verify": cmd_verify,
    "validate": cmd_validate,
    "bench": cmd_bench,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (InstanceError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (GameError, PolymatroidError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except BudgetExceeded as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (InternalInconsistency, NonTerminationError, ConvergenceError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
