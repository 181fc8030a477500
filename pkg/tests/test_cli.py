import json

import pytest
from click.testing import CliRunner

from screwgrasp.cli import main
from screwgrasp.regrasp import compute_score
from screwgrasp.verify import cmd_verify

SMALL = ["--synth-box", "0.16", "0.06", "0.21", "--n-points", "1200", "--cone-facets", "8"]
PLAN = {"skeleton": [{"type": "SLIDE", "direction": [1, 0, 0], "distance": 0.2},
                     {"type": "PICKUP", "distance": 0.1}]}


@pytest.fixture
def plan_file(tmp_path):
    p = tmp_path / "plan.json"
    p.write_text(json.dumps(PLAN))
    return p


def run(*args):
    return CliRunner().invoke(main, [str(a) for a in args])


def test_plan_writes_report(tmp_path, plan_file):
    out = tmp_path / "report.json"
    res = run("plan", "--plan", plan_file, *SMALL, "--out", out)
    assert res.exit_code == 0, res.output
    rep = json.loads(out.read_text())
    assert rep["schema_version"] == 1 and rep["alpha"] >= 1
    assert rep["regrasps"] == rep["alpha"] - 1
    assert rep["parameters"]["cone_facets"] == 8


def test_plan_exports_colored_clouds(tmp_path, plan_file):
    res = run("plan", "--plan", plan_file, *SMALL, "--export-ply", tmp_path / "ply")
    assert res.exit_code == 0, res.output
    assert sorted(p.name for p in (tmp_path / "ply").iterdir())[0].startswith("group_1_segments_1-")


def test_plan_not_executable_exits_4(plan_file):
    # frictionless jaws cannot hold the box against gravity
    res = run("plan", "--plan", plan_file, *SMALL, "--mu-robot", "0")
    assert res.exit_code == 4


def test_unreadable_cloud_exits_2(tmp_path, plan_file):
    bad = tmp_path / "bad.ply"
    bad.write_text("not a ply file\n")
    assert run("plan", bad, "--plan", plan_file).exit_code == 2


def test_bad_plan_exits_2(tmp_path):
    p = tmp_path / "plan.json"
    p.write_text("{")
    assert run("plan", "--plan", p, *SMALL).exit_code == 2


def test_geometry_error_exits_3(tmp_path):
    p = tmp_path / "plan.json"
    p.write_text(json.dumps({"skeleton": [{"type": "PIVOT", "edge": "min_z_min_z"}]}))
    assert run("plan", "--plan", p, *SMALL).exit_code == 3


def test_regions_then_score(tmp_path, plan_file):
    regions = tmp_path / "regions.json"
    res = run("regions", "--plan", plan_file, *SMALL, "--out", regions)
    assert res.exit_code == 0, res.output
    doc = json.loads(regions.read_text())
    assert [r["segment"] for r in doc["regions"]] == [1, 2]
    res = run("score", regions, "--gamma-th", "0.25")
    assert res.exit_code == 0, res.output
    scored = json.loads(res.output)
    sets = [frozenset(r["members"]) for r in doc["regions"]]
    assert scored["all_segments"]["gamma"] == compute_score(sets)[0]


def test_score_rejects_malformed_regions(tmp_path):
    p = tmp_path / "r.json"
    p.write_text(json.dumps({"regions": [{"segment": 1}]}))
    assert run("score", p).exit_code == 2


def test_synth_writes_ply(tmp_path):
    out = tmp_path / "cyl.ply"
    res = run("synth", "--shape", "cylinder", "--dims", "0.04", "--dims", "0.2",
              "--n-points", "500", "--out", out)
    assert res.exit_code == 0 and out.exists()
    assert run("synth", "--shape", "box", "--dims", "1", "--out", out).exit_code == 2


def test_verify_passes():
    res = run("verify", "--instances", "60")
    assert res.exit_code == 0, res.output
    assert "checks passed" in res.output


def test_verify_catches_a_broken_score():
    def off_by_one(sets):
        gamma, Gamma, common = compute_score(sets)
        if len(sets) > 1:
            Gamma = [min(1.0, g + 1.0 / 64) for g in Gamma]
        return min(Gamma), Gamma, common

    lines = []
    assert cmd_verify(0, 60, score_fn=off_by_one, echo=lines.append) == 1
    assert any("score mismatch" in line for line in lines)
