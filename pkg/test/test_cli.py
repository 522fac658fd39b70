import json

import numpy as np
import pandas as pd
import pytest
from loguru import logger

from conftest import DATA
from eikonet.cli import run


@pytest.fixture(autouse=True)
def quiet_logger():
    yield
    logger.remove()
    logger.disable("eikonet")


def run_json(capsys, *argv):
    status = run([str(a) for a in argv])
    out = capsys.readouterr().out
    return status, json.loads(out) if out else None


def test_critical_on_the_loop(capsys):
    status, payload = run_json(capsys, "--network", DATA / "loop.json", "critical")
    assert status == 0
    assert payload["command"] == "critical"
    assert abs(payload["result"]["c"] - 2.0) <= 1e-8
    assert payload["config"]["numerics"]["grid"] == 257


def test_aubry_on_the_loop(capsys):
    status, payload = run_json(capsys, "--network", DATA / "loop.json", "aubry")
    assert status == 0
    (cls,) = payload["result"]["aubry"]["classes"]
    assert cls["origin"] == "cycle"
    assert payload["result"]["condition_D"]["vacuous"]


def test_validate_reports_the_network(capsys):
    status, payload = run_json(capsys, "--network", DATA / "segment.json", "validate")
    assert status == 0
    summary = payload["result"]["network"]
    assert (summary["vertices"], summary["arcs"], summary["dimension"]) == (2, 1, 3)
    assert summary["diameter"] == pytest.approx(2.0)
    assert payload["result"]["field"]["passed"]


def test_distance_with_certificate(capsys):
    status, payload = run_json(
        capsys, "--network", DATA / "loop.json", "distance", "--from", "v:v", "--to", "loop@0.25", "--level", "2"
    )
    assert status == 0
    assert payload["result"]["value"] == pytest.approx(0.0, abs=1e-12)
    assert [leg["dir"] for leg in payload["result"]["certificate"]["legs"]] == ["rev"]


def test_solve_on_the_well(capsys, tmp_path):
    status, payload = run_json(capsys, "--network", DATA / "well.json", "solve", "--trace", DATA / "well_trace.json")
    assert status == 0
    field = payload["result"]["field"]
    assert field["vertices"]["a"] == pytest.approx(0.125, abs=1e-9)
    assert field["vertices"]["b"] == pytest.approx(0.125, abs=1e-9)


def test_solve_as_csv(capsys, tmp_path):
    output = tmp_path / "well.csv"
    status = run(
        ["--network", str(DATA / "well.json"), "--format", "csv", "--output", str(output), "solve", "--trace", str(DATA / "well_trace.json")]
    )
    assert status == 0
    lines = output.read_text().splitlines()
    assert lines[0] == "# command=solve"
    assert any(line.startswith("# level=") for line in lines)
    frame = pd.read_csv(output, comment="#")
    assert list(frame.columns) == ["arc", "s", "value"]
    np.testing.assert_allclose(frame["value"], (frame["s"] - 0.5) ** 2 / 2, atol=1e-9)


def test_critical_history_as_csv(capsys):
    status = run(["--network", str(DATA / "loop.json"), "--format", "csv", "critical"])
    assert status == 0
    out = capsys.readouterr().out
    assert "# c=" in out
    table = [line for line in out.splitlines() if not line.startswith("#")]
    assert table[0] == "level,negative,low,high"
    assert len(table) > 2


@pytest.mark.parametrize(
    "network, trace, on",
    [
        ("loop.json", "loop_trace.json", "trace-domain"),
        ("well.json", "well_trace.json", "trace-domain"),
        ("triangle.json", "triangle_trace.json", "trace-domain"),
        ("well.json", "well_trace.json", "aubry"),
    ],
)
def test_solve_then_verify(capsys, tmp_path, network, trace, on):
    field_path = tmp_path / "field.json"
    status, payload = run_json(capsys, "--network", DATA / network, "solve", "--trace", DATA / trace, "--on", on)
    assert status == 0
    field_path.write_text(json.dumps(payload["result"]["field"]))

    status, payload = run_json(capsys, "--network", DATA / network, "verify", "--field", field_path)
    assert status == 0
    assert payload["result"]["subsolution"]["passed"]
    assert payload["result"]["fixed_point"]["passed"]


def test_verify_rejects_a_doubled_field(capsys, tmp_path):
    _, payload = run_json(capsys, "--network", DATA / "well.json", "solve", "--trace", DATA / "well_trace.json")
    field = payload["result"]["field"]
    field["arcs"][0]["values"] = [2 * v for v in field["arcs"][0]["values"]]
    field["vertices"] = {k: 2 * v for k, v in field["vertices"].items()}
    field_path = tmp_path / "doubled.json"
    field_path.write_text(json.dumps(field))

    status, payload = run_json(capsys, "--network", DATA / "well.json", "verify", "--field", field_path)
    assert status == 1
    assert not payload["result"]["subsolution"]["passed"]


def test_inadmissible_trace_is_reported(capsys, tmp_path):
    trace = tmp_path / "bad.json"
    trace.write_text(
        json.dumps({"points": [{"at": {"vertex": "v"}, "value": 0.0}, {"at": {"arc": "loop", "s": 0.5}, "value": 3.0}]})
    )
    status = run(["--network", str(DATA / "loop.json"), "solve", "--trace", str(trace)])
    captured = capsys.readouterr()
    assert status == 1
    assert captured.out == ""
    payload = json.loads(captured.err.strip().splitlines()[-1])
    assert payload["type"] == "InadmissibleTrace"
    assert payload["report"]["admissible"] is False


def test_harness_and_oracle(capsys):
    status, payload = run_json(capsys, "--network", DATA / "well.json", "harness", "--trials", "3")
    assert status == 0 and payload["result"]["passed"]
    status, payload = run_json(capsys, "--network", DATA / "triangle.json", "--seed", "3", "oracle")
    assert status == 0
    assert [level["passed"] for level in payload["result"]["levels"]] == [True, True]


def test_bad_input_exits_with_two(capsys, tmp_path):
    assert run(["--network", str(tmp_path / "missing.json"), "critical"]) == 2
    assert run(["--network", str(DATA / "loop.json"), "--format", "csv", "aubry"]) == 2
    assert run(["--network", str(DATA / "loop.json"), "--grid", "64", "critical"]) == 2
    assert run(["--network", str(DATA / "loop.json"), "distance", "--from", "v:nowhere", "--to", "v:v"]) == 2


def test_log_file(capsys, tmp_path):
    log_file = tmp_path / "run.log"
    status = run(["--network", str(DATA / "well.json"), "--log-file", str(log_file), "critical"])
    assert status == 0
    assert "Critical value" in log_file.read_text()


def test_malformed_environment_exits_with_two(capsys, monkeypatch):
    monkeypatch.setenv("EIKONET_GRID", "fine")
    assert run(["--network", str(DATA / "loop.json"), "critical"]) == 2
    payload = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert payload["type"] == "ConfigError"


def test_verify_with_a_refined_field(capsys, tmp_path):
    paths = {}
    for grid in (257, 513):
        status, payload = run_json(
            capsys, "--network", DATA / "well.json", "--grid", grid, "solve", "--trace", DATA / "well_trace.json"
        )
        assert status == 0
        paths[grid] = tmp_path / f"field_{grid}.json"
        paths[grid].write_text(json.dumps(payload["result"]["field"]))

    status, payload = run_json(
        capsys, "--network", DATA / "well.json", "verify", "--field", paths[257], "--refined-field", paths[513]
    )
    assert status == 0
    refinement = payload["result"]["subsolution"]["refinement"]
    assert refinement["fine_grid"] >= 513
    assert refinement["converging"]
