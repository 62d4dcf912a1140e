import json

import pytest

from basintopo.cli import main
from basintopo.scenario import MissingArtifactError, Scenario, report


def small(tmp_path, **over):
    d = {
        "name": "tiny",
        "system": "CIRCLE_R2",
        "grid": {"u": [-3, 3], "v": [-3, 3], "nx": 24, "ny": 24},
        "params": {"eps": 0.05, "T_max": 10, "h": 0.02, "tau": 1.0},
        "tubular": {"width": 0.3},
        "stages": ["basin", "tubular", "checks"],
        "checks": ["expected_topology", "gradient"],
        "expect": {"basin_betti": [1, 1], "tubular_betti": [1, 1], "verdict": "CONSISTENT"},
        "seed": 3,
    }
    d.update(over)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(d))
    return str(path)


def error_of(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_run_passes(tmp_path, capsys):
    out = tmp_path / "run"
    assert main(["run", small(tmp_path), "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert "verdict: CONSISTENT" in text
    assert "[PASS] gradient" in text
    for name in ("scenario.json", "basin.csv", "basin_betti.json", "tubular_betti.json",
                 "checks.json", "timings.json", "summary.txt", "report.json"):
        assert (out / name).is_file(), name
    doc = json.loads((out / "report.json").read_text())
    assert doc["verdict"] == "CONSISTENT"
    assert doc["basin_betti"]["b0"] == 1 and doc["basin_betti"]["b1"] == 1
    assert set(doc) >= {"system", "basin_betti", "tubular_betti", "verdict", "checks", "timings"}


def test_failed_expectation_exits_one(tmp_path, capsys):
    cfg = small(tmp_path, expect={"basin_betti": [2, 0]})
    assert main(["run", cfg, "--out", str(tmp_path / "r")]) == 1
    assert "[FAIL] expected_topology" in capsys.readouterr().out


def test_unknown_system(tmp_path, capsys):
    assert main(["run", small(tmp_path, system="TORUS"), "--out", str(tmp_path)]) == 2
    assert error_of(capsys)["error"] == "unknown_system"


@pytest.mark.parametrize("over", [
    {"grid": {"u": [-3, 3], "v": [-3, 3], "nx": 4, "ny": 24}},
    {"grid": {"u": [-3, 3]}},
    {"params": {"h": "fast"}},
    {"tubular": {"width": 2.0}},
    {"stages": ["tubular"]},
    {"checks": ["no_such_check"]},
])
def test_malformed_config(tmp_path, capsys, over):
    assert main(["run", small(tmp_path, **over), "--out", str(tmp_path / "r")]) == 2
    assert error_of(capsys)["error"] == "malformed_config"


def test_not_json(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text("{nope")
    assert main(["run", str(p)]) == 2
    assert error_of(capsys)["error"] == "malformed_config"


def test_empty_complex(tmp_path, capsys):
    # T_max too short for anything but the attractor cells themselves to converge
    cfg = small(tmp_path, grid={"u": [2, 3.5], "v": [2, 3.5], "nx": 8, "ny": 8},
                params={"eps": 0.05, "T_max": 0.5, "h": 0.05, "tau": 1.0},
                stages=["basin"])
    assert main(["run", cfg, "--out", str(tmp_path / "r")]) == 2
    assert error_of(capsys)["error"] == "empty_complex"


def test_partial_run_has_no_verdict(tmp_path, capsys):
    out = tmp_path / "r"
    cfg = small(tmp_path, stages=["basin", "checks"], checks=["gradient"], expect={})
    assert main(["run", cfg, "--out", str(out)]) == 0
    doc = json.loads((out / "report.json").read_text())
    assert doc["verdict"] is None and doc["tubular_betti"] is None
    assert "verdict" not in (out / "summary.txt").read_text()


def test_runs_are_byte_identical(tmp_path):
    cfg = small(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", cfg, "--out", str(a), "--threads", "1"]) == 0
    assert main(["run", cfg, "--out", str(b), "--threads", "3"]) == 0
    for name in ("basin.csv", "basin_betti.json", "tubular_betti.json", "checks.json",
                 "summary.txt", "report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_report_rebuild_and_missing_stage(tmp_path, capsys):
    out = tmp_path / "r"
    main(["run", small(tmp_path), "--out", str(out)])
    before = (out / "report.json").read_bytes()
    capsys.readouterr()
    assert main(["report", str(out)]) == 0
    assert (out / "report.json").read_bytes() == before
    (out / "tubular_betti.json").unlink()
    with pytest.raises(MissingArtifactError) as info:
        report(out)
    assert info.value.stage == "tubular"
    assert main(["report", str(out)]) == 2
    err = error_of(capsys)
    assert err["error"] == "missing_artifact" and "tubular" in err["message"]


def test_basin_then_topo(tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["basin", small(tmp_path), "--out", str(out)]) == 0
    capsys.readouterr()
    assert main(["topo", str(out / "basin.csv")]) == 0
    prof = json.loads(capsys.readouterr().out)
    assert (prof["b0"], prof["b1"]) == (1, 1)
    assert main(["topo", str(tmp_path / "nope.csv")]) == 2


def test_verify_skips_basin_checks(tmp_path, capsys):
    out = tmp_path / "r"
    cfg = small(tmp_path, checks=["expected_topology", "gradient", "stationary"])
    assert main(["verify", cfg, "--out", str(out)]) == 0
    checks = json.loads((out / "checks.json").read_text())["checks"]
    assert list(checks) == ["gradient", "stationary"]
    assert not (out / "basin.csv").exists()


def test_scenario_echo_round_trip(tmp_path):
    scn = Scenario.load(small(tmp_path))
    again = Scenario.from_dict(scn.echo())
    assert again.echo() == scn.echo()
    assert again.grid == scn.grid and again.params == scn.params


def test_bundled_scenarios_load():
    for name in ("circle", "punctured", "cylinder_m0", "funnel"):
        scn = Scenario.load(name)
        assert scn.grid.nx >= 8 and scn.expect


def test_seed_override_is_recorded(tmp_path):
    out = tmp_path / "r"
    main(["verify", small(tmp_path, checks=["gradient"]), "--out", str(out), "--seed", "99"])
    assert json.loads((out / "scenario.json").read_text())["seed"] == 99
