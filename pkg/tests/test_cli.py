import json

import pytest
from click.testing import CliRunner

from reflect.cli import main


@pytest.fixture(scope="module")
def bundle(tmp_path_factory):
    out = tmp_path_factory.mktemp("logs") / "wrong_burner"
    res = CliRunner().invoke(main, ["simulate", "--scenario", "boil_water_wrong_burner", "--out", str(out)])
    assert res.exit_code == 0, res.output
    return out


def test_analyze_and_correct(bundle, tmp_path):
    runner = CliRunner()
    report = tmp_path / "report.json"
    res = runner.invoke(main, ["analyze", "--log", str(bundle), "--backend", "oracle:", "--out", str(report)])
    assert res.exit_code == 0, res.output
    data = json.loads(report.read_text())
    assert data["report"]["failure_type"] == "planning"
    assert [g["action"] for g in data["correction"]["grounded_steps"]] == [
        "toggle_off (stoveburner-2)", "toggle_on (stoveburner-4)"]

    res = runner.invoke(main, ["correct", "--log", str(bundle), "--report", str(report), "--backend", "oracle:",
                               "--out", str(tmp_path / "plan.json")])
    assert res.exit_code == 0, res.output
    assert res.output.splitlines()[:2] == ["toggle_off (stoveburner-2)", "toggle_on (stoveburner-4)"]


def test_eval_writes_metrics(tmp_path):
    suite = tmp_path / "suite.txt"
    suite.write_text("# two scenarios\nboil_water_drop\nboil_water_success\n")
    out = tmp_path / "metrics.json"
    res = CliRunner().invoke(main, ["eval", "--suite", str(suite), "--backend", "oracle:", "--out", str(out)])
    assert res.exit_code == 0, res.output
    data = json.loads(out.read_text())
    assert data["loc"] == 100.0 and data["type_accuracy"] == 100.0


def test_input_errors_exit_2(bundle, tmp_path):
    runner = CliRunner()
    out = str(tmp_path / "r.json")
    cases = [
        ["simulate", "--scenario", "no_such_scenario", "--out", str(tmp_path / "x")],
        ["analyze", "--log", str(tmp_path / "missing"), "--backend", "oracle:", "--out", out],
        ["analyze", "--log", str(bundle), "--backend", "carrier-pigeon:", "--out", out],
        ["analyze", "--log", str(bundle), "--backend", f"replay:{tmp_path / 'none.json'}", "--out", out],
    ]
    bad_suite = tmp_path / "suite.json"
    bad_suite.write_text('["boil_water_drop", "unknown_thing"]')
    cases.append(["eval", "--suite", str(bad_suite), "--backend", "oracle:", "--out", out])
    for args in cases:
        res = runner.invoke(main, args)
        assert res.exit_code == 2, (args, res.output)


def test_pipeline_error_exits_1(bundle, tmp_path):
    transcript = tmp_path / "empty.json"
    transcript.write_text("[]")
    res = CliRunner().invoke(main, ["analyze", "--log", str(bundle), "--backend", f"replay:{transcript}",
                                    "--out", str(tmp_path / "r.json")])
    assert res.exit_code == 1
    assert "not in transcript" in res.output
