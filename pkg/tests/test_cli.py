import csv
import json
from fractions import Fraction as F

import pytest

from splitgame import Game, Oligopoly, epsilon_gap
from splitgame.cli import EXIT_BUDGET, EXIT_INFEASIBLE, EXIT_PARSE, main
from splitgame.instance import InstanceError, load_instance, parse_instance, profile_from_json
from splitgame.integral import game_rank_gcd

SIMPLEX = {"simplex": {"allowed": ["e1", "e2"], "rank": "1"}}


def symmetric_instance():
    player = {"demand": "1", "polymatroid": SIMPLEX, "costs": {"e1": [0, 1], "e2": [0, 1]}}
    return {"version": 1, "kind": "congestion", "resources": ["e1", "e2"], "players": [player, player]}


def explicit_table(rows):
    return {"explicit": [{"subset": s, "rank": r} for s, r in rows]}


def duopoly_instance():
    firm = {"markets": ["m1"], "cost": 0, "prices": {"m1": {"affine": [10, 1]}}}
    return {"version": 1, "kind": "cournot", "markets": ["m1"],
            "firms": [dict(firm, name="a"), dict(firm, name="b")]}


@pytest.fixture
def write(tmp_path):
    def _write(name, payload):
        path = tmp_path / name
        path.write_text(json.dumps(payload), encoding="utf-8")
        return str(path)
    return _write


class TestParse:
    def test_symmetric(self):
        g = load_instance(symmetric_instance())
        assert isinstance(g, Game)
        assert (g.n, g.m) == (2, 2)

    def test_rank_gcd_from_strings(self):
        data = symmetric_instance()
        data["players"][1] = {
            "demand": "1/3",
            "polymatroid": explicit_table([([], "0"), (["e1"], "1/2"), (["e2"], "1/2"), (["e1", "e2"], "1/2")]),
            "costs": {"e1": [0, 1]},
        }
        assert game_rank_gcd(load_instance(data)) == F(1, 6)

    def test_cournot(self):
        o = load_instance(duopoly_instance())
        assert isinstance(o, Oligopoly)
        assert [f.name for f in o.firms] == ["a", "b"]

    def test_submodularity_violation_names_sets(self):
        data = symmetric_instance()
        data["players"][0]["polymatroid"] = explicit_table(
            [([], "0"), (["e1"], "1"), (["e2"], "1"), (["e1", "e2"], "3")])
        with pytest.raises(InstanceError, match=r"e1.*e2|e2.*e1"):
            load_instance(data)

    @pytest.mark.parametrize("mutate, field", [
        (lambda d: d["players"][0].update(demand=0.5), "players.0.demand"),
        (lambda d: d["players"][0].update(demand="1/0"), "players.0.demand"),
        (lambda d: d["players"][0]["costs"].update(e1=[-1, 1]), "players.0.costs.e1"),
        (lambda d: d["players"][0].update(colour="red"), "players.0.colour"),
        (lambda d: d["players"][0]["costs"].update(e9=[1]), "players.0.costs"),
        (lambda d: d.update(version=2), "version"),
    ])
    def test_errors_name_the_field(self, mutate, field):
        data = symmetric_instance()
        mutate(data)
        with pytest.raises(InstanceError, match=field.replace(".", r"\.")):
            load_instance(data)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{", encoding="utf-8")
        with pytest.raises(InstanceError):
            parse_instance(path)


class TestCommands:
    def test_solve_symmetric(self, write, tmp_path, capsys):
        inst = write("symm2x2.json", symmetric_instance())
        out = tmp_path / "report.json"
        assert main(["solve", inst, "--epsilon", "0.5", "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["max_gap"] <= 0.5
        assert report["profile"] == [{"e1": "1/2", "e2": "1/2"}] * 2
        assert report["k"] == "1/32"
        assert "predicted work" in capsys.readouterr().err

    def test_report_round_trip(self, write, tmp_path, capsys):
        data = symmetric_instance()
        data["players"][1]["costs"] = {"e1": [0, 2], "e2": [1, 1, 1]}
        inst = write("asym.json", data)
        out = tmp_path / "report.json"
        assert main(["solve", inst, "--k", "1/4", "--out", str(out), "--tol", "1e-6"]) == 0
        report = json.loads(out.read_text())
        assert main(["verify", inst, str(out)]) == 0
        verified = json.loads(capsys.readouterr().out)
        assert verified["gaps"] == pytest.approx(report["gaps"], abs=1e-9)
        g = parse_instance(inst)
        again = epsilon_gap(g, profile_from_json(g, report["profile"]), report["tol"])
        assert list(again.gaps) == pytest.approx(report["gaps"], abs=1e-9)

    def test_verify_bare_profile(self, write, capsys):
        inst = write("symm.json", symmetric_instance())
        prof = write("prof.json", [{"e1": "1", "e2": "0"}, {"e1": "1", "e2": "0"}])
        assert main(["verify", inst, prof, "--tol", "1e-9"]) == 0
        assert json.loads(capsys.readouterr().out)["max_gap"] == pytest.approx(9 / 8, abs=1e-8)

    def test_verify_infeasible_profile(self, write):
        inst = write("symm.json", symmetric_instance())
        prof = write("prof.json", [{"e1": "1", "e2": "1"}, {"e1": "1", "e2": "0"}])
        assert main(["verify", inst, prof]) == EXIT_INFEASIBLE

    def test_validate(self, write, capsys):
        assert main(["validate", write("ok.json", symmetric_instance())]) == 0
        assert capsys.readouterr().out.startswith("ok: congestion game, 2 players")
        assert main(["validate", write("duo.json", duopoly_instance())]) == 0

    def test_validate_bad_table(self, write, capsys):
        data = symmetric_instance()
        data["players"][0]["polymatroid"] = explicit_table(
            [([], "0"), (["e1"], "1"), (["e2"], "1"), (["e1", "e2"], "3")])
        assert main(["validate", write("bad_table.json", data)]) == EXIT_PARSE
        assert "submodular" in capsys.readouterr().err

    def test_missing_file(self, tmp_path):
        assert main(["validate", str(tmp_path / "nope.json")]) == EXIT_PARSE

    def test_wrong_kind(self, write):
        assert main(["solve", write("duo.json", duopoly_instance()), "--epsilon", "1"]) == EXIT_PARSE

    def test_cournot(self, write, tmp_path):
        out = tmp_path / "report.json"
        inst = write("duo.json", duopoly_instance())
        # the cubic work estimate for d = 10, k = 1/3960 is far above the default budget
        assert main(["cournot", inst, "--epsilon", "0.5"]) == EXIT_BUDGET
        assert main(["cournot", inst, "--epsilon", "0.5", "--force", "--out", str(out)]) == 0
        report = json.loads(out.read_text())
        assert report["kind"] == "cournot"
        for firm in ("a", "b"):
            assert abs(float(F(report["quantities"][firm]["m1"])) - 10 / 3) <= 0.25
        assert report["max_gap"] <= 0.5
        assert report["utilities"] == pytest.approx([100 / 9] * 2, abs=0.5)

    def test_bench(self, write, tmp_path):
        out = tmp_path / "bench.csv"
        data = symmetric_instance()
        data["players"][1]["costs"] = {"e1": [0, 2], "e2": [0, 1]}
        assert main(["bench", write("i.json", data), "--k", "1,1/2,1/4", "--tol", "1e-6",
                     "--out", str(out)]) == 0
        rows = list(csv.DictReader(out.open()))
        assert [r["k"] for r in rows] == ["1", "1/2", "1/4"]
        for r in rows:
            assert float(r["max_gap"]) <= float(r["bound"]) + 2e-6

    def test_trace(self, write, tmp_path):
        trace = tmp_path / "trace.csv"
        assert main(["solve", write("s.json", symmetric_instance()), "--k", "1/2",
                     "--trace", str(trace), "--out", str(tmp_path / "r.json")]) == 0
        rows = list(csv.reader(trace.open()))
        assert rows[0] == ["step", "player", "added", "removed", "gain"]
        assert len(rows) - 1 == 4  # four packets, no repairs needed
        assert {r[2] for r in rows[1:]} == {"e1", "e2"}


class TestExitCodes:
    def test_budget_refusal_does_not_solve(self, write, monkeypatch):
        import splitgame.cli as cli

        def boom(*_args, **_kwargs):
            raise AssertionError("solver must not run")

        monkeypatch.setattr(cli, "solve_approx", boom)
        monkeypatch.setattr(cli, "solve_integral", boom)
        inst = write("s.json", symmetric_instance())
        assert main(["solve", inst, "--epsilon", "0.01", "--budget", "1000"]) == EXIT_BUDGET
        assert main(["bench", inst, "--k", "1/64", "--budget", "1000"]) == EXIT_BUDGET

    def test_force_overrides_budget(self, write, tmp_path):
        inst = write("s.json", symmetric_instance())
        assert main(["solve", inst, "--k", "1/8", "--budget", "1", "--force",
                     "--out", str(tmp_path / "r.json")]) == 0

    def test_indivisible_forced_k(self, write):
        assert main(["solve", write("s.json", symmetric_instance()), "--k", "2/3"]) == EXIT_INFEASIBLE

    def test_missing_epsilon(self, write):
        assert main(["solve", write("s.json", symmetric_instance())]) == EXIT_PARSE

    def test_bad_k_argument(self, write):
        with pytest.raises(SystemExit) as exc:
            main(["solve", write("s.json", symmetric_instance()), "--k", "abc"])
        assert exc.value.code == 2
