import json
from pathlib import Path

import pytest
from click.testing import CliRunner

from equitrace.cli import base
from equitrace.cli.base import cli

CONFIG_DIR = Path(__file__).parents[2] / "configs"
CIRCLE = CONFIG_DIR / "circle.yml"


def invoke(*args):
    return CliRunner().invoke(cli, [str(a) for a in args])


def read_json(path):
    return json.loads(Path(path).read_text())


def test_all_on_translation_line(tmp_path):
    result = invoke(
        "all", "--config", CONFIG_DIR / "translation-line.yml", "--out", tmp_path
    )
    assert result.exit_code == 0, result.output

    trace = read_json(tmp_path / "trace.json")
    assert trace["failures"] == []
    assert len(trace["atoms"]) == 1
    assert trace["atoms"][0]["l"] == pytest.approx(0.7, abs=1e-10)
    assert trace["atoms"][0]["weight"] == pytest.approx(1.0, abs=1e-10)
    resolved = trace["resolved_config"]["trace"]
    assert [p["psi"] for p in trace["pairings"]] == resolved["psi"]
    assert trace["hypotheses"]["accepted"] is True

    assert (tmp_path / "orbits.csv").read_text().startswith("x_payload,l,m0_1,kind,")
    curve = (tmp_path / "pairing-curve.csv").read_text().splitlines()
    assert curve[0] == "c,value"
    assert len(curve) == 57

    verify = read_json(tmp_path / "verify.json")
    assert verify["mode"] == "mollified"
    assert verify["result"]["passed"] is True


def test_trace_overrides(tmp_path):
    result = invoke(
        "trace",
        "--config",
        CONFIG_DIR / "translation-line.yml",
        "--g",
        "-1.3",
        "--psi",
        "bump:center=-1.3,radius=0.5",
        "--out",
        tmp_path,
    )
    assert result.exit_code == 0, result.output
    trace = read_json(tmp_path / "trace.json")
    assert trace["g"] == "-1.3"
    assert trace["pairings"][0]["value"] == pytest.approx(1.0, abs=1e-10)


def test_degenerate_orbit_fails(tmp_path):
    result = invoke(
        "trace", "--config", CONFIG_DIR / "degenerate-shear.yml", "--out", tmp_path
    )
    assert result.exit_code == 1
    assert "DegenerateOrbit" in result.output
    failures = read_json(tmp_path / "trace.json")["failures"]
    assert [f["error"] for f in failures] == ["DegenerateOrbit"]


def test_orbits_reports_degenerate(tmp_path):
    result = invoke(
        "orbits", "--config", CONFIG_DIR / "degenerate-shear.yml", "--out", tmp_path
    )
    assert result.exit_code == 0, result.output
    report = read_json(tmp_path / "orbits.json")
    assert report["orbit_count"] > 0
    assert len(report["degenerate"]) == report["orbit_count"]


def test_covering_verify_on_circle(tmp_path):
    result = invoke(
        "verify",
        "--config",
        CONFIG_DIR / "circle.yml",
        "--mode",
        "covering",
        "--out",
        tmp_path,
    )
    assert result.exit_code == 0, result.output
    verify = read_json(tmp_path / "verify.json")
    assert verify["result"]["exact"] is True
    assert verify["result"]["difference"] <= 1e-6
    assert verify["result"]["quotient_run"]["difference"] <= 1e-6


def test_catmap_verify(tmp_path):
    result = invoke("verify", "--config", CONFIG_DIR / "catmap.yml", "--out", tmp_path)
    assert result.exit_code == 0, result.output
    verify = read_json(tmp_path / "verify.json")
    assert verify["mode"] == "catmap"
    periods = verify["result"]["periods"]
    assert [p["census"]["n"] for p in periods] == [1, 2, 3]
    assert all(p["relative_error"] <= 1e-8 for p in periods)
    assert verify["result"]["passed"] is True


def test_runs_are_deterministic(tmp_path):
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        result = invoke(
            "trace", "--config", CONFIG_DIR / "translation-line.yml", "--out", out
        )
        assert result.exit_code == 0, result.output
        outputs.append(out)
    for filename in ("trace.json", "pairing-curve.csv"):
        first = (outputs[0] / filename).read_bytes()
        assert first == (outputs[1] / filename).read_bytes()


@pytest.mark.parametrize(
    "args,code,text",
    [
        (["trace", "--config", "absent.yml"], 1, "does not exist"),
        (["trace", "--config", CIRCLE, "--g", "x"], 1, "ValidationError"),
        (["verify", "--config", CIRCLE, "--mode", "oracle"], 2, "oracle"),
        (["trace", "--config", CIRCLE, "--threads", "0"], 2, "threads"),
    ],
)
def test_bad_invocations(tmp_path, args, code, text):
    result = invoke(*args, "--out", tmp_path)
    assert result.exit_code == code
    assert text in result.output


def test_help():
    result = invoke("--help")
    assert result.exit_code == 0
    for command in ("orbits", "trace", "verify", "all"):
        assert command in result.output


def test_debug_log_is_written(tmp_path):
    assert base.log_file_fqn.name.startswith("equitrace_")
    result = invoke(
        "orbits", "--config", CONFIG_DIR / "translation-line.yml", "--out", tmp_path
    )
    assert result.exit_code == 0, result.output
    text = base.log_file_fqn.read_text()
    assert "Writing debug log into" in text
    assert "DEBUG" in text
