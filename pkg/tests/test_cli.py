import json
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from robustplan import io
from robustplan.cli import main
from robustplan.controller import ControllerSpec
from robustplan.estimation import edge_stats_from_counts
from robustplan.mdp import MdpEstimate, value_iteration
from robustplan.roadmap import Roadmap
from robustplan.scenario import Obstacle

from conftest import empty_box

SVG = "{http://www.w3.org/2000/svg}"


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr().out
    return code, json.loads(out)


def write_scenario(path, scenario, controllers=(ControllerSpec(),), planner=None):
    io.write_json(path, io.ScenarioFile(scenario, list(controllers), planner or {}).to_dict())
    return path


def write_roadmap(path, milestones, edges=(), **params):
    ms = np.asarray(milestones, dtype=float)
    nan = np.full((1, ms.shape[1]), np.nan)
    stats = {e: edge_stats_from_counts(10, 10, 1.0, 0.95) for e in edges}
    params = {"k": 1, "T": 40, "gamma": 0.95, **params}
    io.write_json(path, Roadmap(np.vstack([nan, ms, nan]), stats, params).to_dict())
    return path


@pytest.fixture
def corridor(tmp_path, capsys):
    path = tmp_path / "corridor.json"
    assert run(capsys, "demo", "corridor", "--out", path)[0] == 0
    return path


# ------------------------------------------------------------------ errors


def test_missing_scenario_is_an_io_error(tmp_path, capsys):
    out = tmp_path / "rm.json"
    code, doc = run(capsys, "build", "--scenario", tmp_path / "nope.json", "--out", out, "--n", 5)
    assert code == 6 and doc["error"] == "io"
    assert not out.exists()
    assert list(tmp_path.iterdir()) == []


def test_invalid_flags_are_validation_errors(tmp_path, capsys):
    sc = write_scenario(tmp_path / "s.json", empty_box())
    out = tmp_path / "rm.json"
    for flags in (["--gamma", 1.5], ["--n", 1], ["--k", 0], ["--trials", -3], ["--seed", -1]):
        code, doc = run(capsys, "build", "--scenario", sc, "--out", out, *flags)
        assert code == 2, flags
        assert doc["error"] == "validation"
    assert not out.exists()


def test_malformed_scenario_is_a_validation_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(capsys, "validate", "--scenario", bad)[0] == 2
    bad.write_text(json.dumps({"scenario": {"lower": [0, 0]}}))
    assert run(capsys, "validate", "--scenario", bad)[0] == 2


def test_infeasible_reports_best_probability(tmp_path, capsys):
    noisy = Obstacle.disc((0.35, 0.2), 0.03, std=(0.05, 0.05))
    sc = write_scenario(tmp_path / "s.json", empty_box().replace(obstacles=[noisy]))
    rm = write_roadmap(tmp_path / "rm.json", [[0.5, 0.5]])
    code, doc = run(capsys, "plan", "--scenario", sc, "--roadmap", rm, "--p-min", 0.9999, "--seed", 3)
    assert code == 4
    assert doc["error"] == "infeasible"
    assert 0 < doc["best_probability"] < 0.9999
    assert doc["p_min"] == 0.9999 and doc["S"] == 1024
    # the max-probability path attains the reported bound
    code, path = run(capsys, "plan", "--scenario", sc, "--roadmap", rm, "--seed", 3)
    assert code == 0
    assert path["success_lower_bound"] == pytest.approx(doc["best_probability"], rel=1e-12)


def test_unreachable_exit_code(tmp_path, capsys):
    sc = write_scenario(tmp_path / "s.json", empty_box())
    rm = write_roadmap(tmp_path / "rm.json", [[0.2, 0.2], [0.8, 0.8]])
    code, doc = run(capsys, "plan", "--scenario", sc, "--roadmap", rm)
    assert code == 3 and doc["error"] == "unreachable"


def test_dimension_mismatch(tmp_path, capsys):
    sc = write_scenario(tmp_path / "s.json", empty_box())
    rm = write_roadmap(tmp_path / "rm.json", [[0.2, 0.2, 0.1]])
    assert run(capsys, "plan", "--scenario", sc, "--roadmap", rm)[0] == 2


# ---------------------------------------------------------- build & plan


def test_build_plan_render_and_determinism(tmp_path, capsys, corridor):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    code, summary = run(capsys, "build", "--scenario", corridor, "--out", a, "--n", 60, "--k", 6, "--trials", 30,
                        "--seed", 4)
    assert code == 0
    assert summary["milestones"] == 59
    assert sum(summary["edge_probability_histogram"]["counts"]) == summary["edges"]
    run(capsys, "build", "--scenario", corridor, "--out", b, "--n", 60, "--k", 6, "--trials", 30, "--seed", 4)
    assert a.read_bytes() == b.read_bytes()

    svg = tmp_path / "p.svg"
    code, plan = run(capsys, "plan", "--scenario", corridor, "--roadmap", a, "--render", svg, "--runs", 20,
                     "--seed", 4, "--out", tmp_path / "plan.json")
    assert code == 0
    assert plan["path"][0] == 0 and plan["path"][-1] == 60
    assert 0 <= plan["execution"]["success_rate"] <= 1
    assert json.loads((tmp_path / "plan.json").read_text()) == plan
    root = ET.parse(svg).getroot()
    assert root.tag == SVG + "svg"
    assert len(root.findall(f".//{SVG}path")) == 1


def test_sweep_costs_are_nondecreasing(tmp_path, capsys, corridor):
    rm = tmp_path / "rm.json"
    run(capsys, "build", "--scenario", corridor, "--out", rm, "--n", 80, "--k", 8, "--trials", 30, "--seed", 1)
    svg = tmp_path / "sweep.svg"
    code, doc = run(capsys, "plan", "--scenario", corridor, "--roadmap", rm, "--sweep", "0.1,0.3,0.6,0.9,0.999999",
                    "--render", svg, "--seed", 1)
    assert code == 0
    recs = doc["sweep"]
    assert [r["p_min"] for r in recs] == [0.1, 0.3, 0.6, 0.9, 0.999999]
    ok = [r for r in recs if r["status"] == "ok"]
    assert len(ok) >= 2
    costs = [r["cost"] for r in ok]
    assert costs == sorted(costs)
    assert all(r["success_lower_bound"] >= r["p_min"] for r in ok)
    for r in recs:
        if r["status"] == "infeasible":
            assert r["best_probability"] < r["p_min"]
    root = ET.parse(svg).getroot()
    assert len(root.findall(f".//{SVG}path")) == len(ok)


def test_sweep_and_p_min_are_exclusive(tmp_path, capsys):
    sc = write_scenario(tmp_path / "s.json", empty_box())
    rm = write_roadmap(tmp_path / "rm.json", [[0.5, 0.5]])
    assert run(capsys, "plan", "--scenario", sc, "--roadmap", rm, "--sweep", "0.5", "--p-min", 0.5)[0] == 2
    assert run(capsys, "plan", "--scenario", sc, "--roadmap", rm, "--sweep", "0.5,2")[0] == 2


# ------------------------------------------------------------------- mdp


@pytest.mark.filterwarnings("ignore:a worst-case transition row")
def test_mdp_estimate_and_solve(tmp_path, capsys):
    sc = write_scenario(tmp_path / "s.json", empty_box().replace(step_size=0.02),
                        controllers=[ControllerSpec(), ControllerSpec(actuation_noise_std=0.01)])
    e1, e2 = tmp_path / "e1.json", tmp_path / "e2.json"
    code, summary = run(capsys, "mdp", "estimate", "--scenario", sc, "--out", e1, "--n", 2, "--trials", 10,
                        "--alpha", 0.9, "--seed", 5)
    assert code == 0
    assert summary["regions"] == 2 and summary["actions"] == 2
    run(capsys, "mdp", "estimate", "--scenario", sc, "--out", e2, "--n", 2, "--trials", 10, "--alpha", 0.9,
        "--seed", 5)
    assert e1.read_bytes() == e2.read_bytes()

    s1, s2 = tmp_path / "s1.json", tmp_path / "s2.json"
    code, sol = run(capsys, "mdp", "solve", "--estimate", e1, "--out", s1, "--verbose")
    assert code == 0
    run(capsys, "mdp", "solve", "--estimate", e1, "--out", s2, "--verbose")
    assert s1.read_bytes() == s2.read_bytes()
    est = MdpEstimate.from_dict(json.loads(e1.read_text()))
    assert len(sol["policy"]) == 2
    assert all(0 <= a < est.n_actions for a in sol["policy"])
    assert all(lo <= hi + 1e-12 for lo, hi in zip(sol["V_lo"], sol["V_hi"]))
    assert len(sol["residuals"]) == sol["iterations"]

    # gamma = 0.5 makes every interval a point, so both bounds are classic VI
    code, point = run(capsys, "mdp", "solve", "--estimate", e1, "--out", tmp_path / "p.json", "--gamma", 0.5,
                      "--tol", 1e-12)
    V, policy = value_iteration(est.P_hat, est.c_hat, tol=1e-12)
    np.testing.assert_allclose(point["V_hi"], V, atol=1e-9)
    np.testing.assert_allclose(point["V_lo"], V, atol=1e-9)
    assert point["policy"] == policy.tolist()

    code, ell = run(capsys, "mdp", "solve", "--estimate", e1, "--out", tmp_path / "x.json", "--mode", "ellipsoid")
    assert code in (0, 5)
    if code == 0:
        assert len(ell["V"]) == 2


def test_mdp_noncontractive_exit(tmp_path, capsys):
    ms = np.array([[0.0, 0.0], [1.0, 0.0]])
    est = MdpEstimate(0.9, ms, np.array([[1], [0]]), np.array([[[1, 1]], [[0, 0]]]), np.ones((2, 1, 2), dtype=int),
                      np.ones((2, 1, 2)))
    path = tmp_path / "e.json"
    io.write_json(path, est.to_dict())
    code, doc = run(capsys, "mdp", "solve", "--estimate", path, "--out", tmp_path / "s.json")
    assert code == 5 and doc["error"] == "non_contractive"
    assert sorted(map(tuple, doc["offenders"])) == [(0, 0), (1, 0)]
    assert not (tmp_path / "s.json").exists()


# ----------------------------------------------------------- misc commands


def test_bound_prints_an_integer(capsys):
    assert main(["bound", "--epsilon", "0.5", "--alpha", "0.5", "--beta", "0.5", "--gamma", "0.1"]) == 0
    assert capsys.readouterr().out == "384\n"
    assert main(["bound", "--epsilon", "1", "--alpha", "1", "--beta", "1", "--gamma", "1"]) == 0
    assert capsys.readouterr().out == "42\n"
    assert main(["bound", "--epsilon", "0", "--alpha", "1", "--beta", "1", "--gamma", "1"]) == 2


def test_demo_list_and_validate(tmp_path, capsys):
    code, doc = run(capsys, "demo", "--list")
    assert doc == {"demos": ["arm", "corridor", "two_robots"]}
    for name in doc["demos"]:
        path = tmp_path / f"{name}.json"
        assert run(capsys, "demo", name, "--out", path)[0] == 0
        code, info = run(capsys, "validate", "--scenario", path)
        assert code == 0 and info["valid"]
        if name == "arm":
            assert info["robot"] == "planar_arm" and info["dof"] == 5


def test_atomic_write_leaves_no_temp_files(tmp_path):
    target = tmp_path / "x.json"
    io.write_json(target, {"a": 1})
    io.write_json(target, {"a": 2})
    assert json.loads(target.read_text()) == {"a": 2}
    assert [p.name for p in tmp_path.iterdir()] == ["x.json"]
    with pytest.raises(ValueError):
        io.write_json(target, {"a": float("nan")})
    assert json.loads(target.read_text()) == {"a": 2}
    assert [p.name for p in tmp_path.iterdir()] == ["x.json"]
