import json
from importlib import resources

import numpy as np
import pytest

from dibm import cli, physics
from dibm.io import OutputExistsError, format_value, read_csv, svg_line_plot, write_csv, write_json

jsonschema = pytest.importorskip("jsonschema")
referencing = pytest.importorskip("referencing")


def validator(name):
    files = resources.files("dibm") / "schemas"
    schemas = {p.name: json.loads(p.read_text()) for p in files.iterdir() if p.name.endswith(".json")}
    registry = referencing.Registry().with_resources(
        (k, referencing.Resource.from_contents(v)) for k, v in schemas.items())
    return jsonschema.Draft202012Validator(schemas[name], registry=registry)


def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(np.float64(1 / 3)) == "0.33333333333333331"
    assert format_value(True) == "true" and format_value(np.bool_(False)) == "false"
    assert format_value(7) == "7" and format_value("frozen") == "frozen"


def test_csv_round_trip_is_exact(tmp_path, rng):
    vals = rng.normal(scale=1e3, size=(20, 3))
    path = write_csv(tmp_path / "a.csv", ["x", "y", "z"], vals.tolist())
    header, rows = read_csv(path)
    assert header == ["x", "y", "z"]
    assert np.array_equal(np.array(rows), vals)
    assert path.read_bytes().count(b"\r") == 0


def test_overwrite_guard(tmp_path):
    write_csv(tmp_path / "a.csv", ["x"], [[1]])
    with pytest.raises(OutputExistsError, match="--overwrite"):
        write_csv(tmp_path / "a.csv", ["x"], [[2]])
    write_csv(tmp_path / "a.csv", ["x"], [[2]], overwrite=True)
    assert read_csv(tmp_path / "a.csv")[1] == [[2]]


def test_json_maps_infinity_to_null(tmp_path):
    path = write_json(tmp_path / "r.json", {"a": float("inf"), "b": np.float64(1.5)})
    assert json.loads(path.read_text()) == {"a": None, "b": 1.5}


def test_svg_is_well_formed():
    import xml.etree.ElementTree as ET

    svg = svg_line_plot([{"x": [0, 1], "y": [0, 2], "label": "a < b"}], title="t & u",
                        vlines=[(0.5, "green", "mid")])
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")


def test_parse_config_precedence(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("Q = 330\nM = 40\n")
    rc = cli.parse_config(["equilibrium", "--config", str(cfg), "--M", "30", "--out", str(tmp_path)])
    assert rc.params.Q == 330.0 and rc.params.M == 30.0 and rc.params.A == 202.0
    assert rc.command == "equilibrium" and rc.out_dir == tmp_path


@pytest.mark.parametrize("argv", [
    ["equilibrium", "--dt", "0.3"],
    ["equilibrium", "--M", "5"],
    ["equilibrium", "--n_points", "600"],
    ["equilibrium", "--config", "/nonexistent/run.cfg"],
])
def test_bad_configuration_exits_2(argv, tmp_path, capsys):
    assert cli.main(argv + ["--out", str(tmp_path)]) == 2
    assert "configuration error" in capsys.readouterr().err


def test_unknown_config_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("solar = 340\n")
    assert cli.main(["equilibrium", "--config", str(cfg), "--out", str(tmp_path)]) == 2
    assert "unknown key" in capsys.readouterr().err


def test_dt_message_on_cli(tmp_path, capsys):
    cli.main(["equilibrium", "--dt", "0.3", "--out", str(tmp_path)])
    assert "dt must be < 1/(B+C) ≈ 0.2024" in capsys.readouterr().err


def test_help_lists_defaults(capsys):
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["simulate", "--help"])
    text = capsys.readouterr().out
    assert "--Q" in text and "default: 343" in text


def test_equilibrium_command(tmp_path, capsys):
    assert cli.main(["equilibrium", "--out", str(tmp_path)]) == 0
    header, rows = read_csv(tmp_path / "equilibrium_roots.csv")
    assert header[:3] == ["eta", "iceline_temp_C", "kind"]
    interior = [r for r in rows if r[2] == "interior"]
    assert [r[3] for r in interior] == [False, True]
    assert (tmp_path / "equilibrium_h.svg").read_text().startswith("<svg")
    # second run without --overwrite refuses and leaves files alone
    before = (tmp_path / "equilibrium_h.csv").read_bytes()
    assert cli.main(["equilibrium", "--out", str(tmp_path)]) == 2
    assert (tmp_path / "equilibrium_h.csv").read_bytes() == before
    assert cli.main(["equilibrium", "--out", str(tmp_path), "--overwrite"]) == 0


def test_simulate_command(tmp_path):
    argv = ["simulate", "--eta0", "0.5", "--max-steps", "300", "--out", str(tmp_path)]
    assert cli.main(argv) == 0
    summary = json.loads((tmp_path / "simulate_eta0_0.5_summary.json").read_text())
    validator("run_summary.schema.json").validate(summary)
    assert summary["outcome"] == "max_steps" and summary["steps"] == 300
    header, rows = read_csv(tmp_path / "simulate_eta0_0.5_frames.csv")
    assert header == ["time", "eta", "iceline_temp_C", "mean_temp_C"] and len(rows) == 7
    header, rows = read_csv(tmp_path / "simulate_eta0_0.5_profiles.csv")
    assert header == ["time", "y", "temperature_C"] and len(rows) == 601


def test_simulate_fixed_iceline_from_equilibrium(tmp_path):
    argv = ["simulate", "--eta0", "0.3", "--start", "equilibrium", "--fixed-iceline",
            "--no-profiles", "--out", str(tmp_path)]
    assert cli.main(argv) == 0
    summary = json.loads((tmp_path / "simulate_eta0_0.3_summary.json").read_text())
    assert summary["steps"] == 0 and summary["fixed_iceline"] is True
    assert not (tmp_path / "simulate_eta0_0.3_profiles.csv").exists()


def test_manifold_command(tmp_path):
    assert cli.main(["manifold", "--eps", "4e-4", "--no-graph-dump", "--out", str(tmp_path)]) == 0
    report = json.loads((tmp_path / "manifold_certificate.json").read_text())
    validator("certificate.schema.json").validate(report)
    assert report["certified"] is True and report["residual"] < 1e-9
    assert len(report["crossings"]) == 2
    header, rows = read_csv(tmp_path / "manifold_iceline.csv")
    assert len(rows) == 201


def test_manifold_command_reports_nonconvergence(tmp_path, capsys):
    assert cli.main(["manifold", "--max-iter", "2", "--out", str(tmp_path)]) == 1
    assert "converge" in capsys.readouterr().err.lower()


def test_bifurcate_command(tmp_path, capsys):
    argv = ["bifurcate", "--q-min", "320", "--q-max", "340", "--q-step", "2", "--out", str(tmp_path)]
    assert cli.main(argv) == 0
    out = capsys.readouterr().out
    assert "325.896" in out and "0 -> 2" in out
    header, rows = read_csv(tmp_path / "bifurcation.csv")
    assert header == ["Q", "eta", "kind", "stable"]
    assert {r[0] for r in rows} == set(range(320, 341, 2))


def test_verify_skip_all_but_equilibria(tmp_path, capsys):
    argv = ["verify", "--skip", "manifold", "--skip", "dynamics", "--skip", "bifurcation",
            "--skip", "determinism", "--skip", "1", "--out", str(tmp_path)]
    assert cli.main(argv) == 0
    report = json.loads((tmp_path / "verify_report.json").read_text())
    validator("verify_report.schema.json").validate(report)
    status = {c["key"]: c["status"] for c in report["checks"]}
    assert status == {"1": "SKIP", "2": "SKIP", "3": "SKIP", "4": "SKIP", "5": "SKIP", "6": "SKIP",
                      "7": "SKIP", "8": "SKIP", "9": "PASS", "10": "PASS", "11": "SKIP"}
    assert not (tmp_path / "manifold.csv").exists()
    assert (tmp_path / "roots.csv").exists()


def test_verify_detects_corrupted_albedo(tmp_path, monkeypatch):
    # albedo midpoint 0.48 instead of 0.47: the root and quadrature checks notice
    monkeypatch.setattr(physics, "ALBEDO_MID", 0.48)
    argv = ["verify", "--skip", "manifold", "--skip", "dynamics", "--skip", "bifurcation",
            "--skip", "determinism", "--out", str(tmp_path)]
    assert cli.main(argv) == 1
    report = json.loads((tmp_path / "verify_report.json").read_text())
    status = {c["key"]: c["status"] for c in report["checks"]}
    assert report["passed"] is False
    assert status["1"] == "FAIL" and status["9"] == "FAIL"
