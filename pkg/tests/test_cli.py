"""Command line behavior: exit codes and report files."""

from __future__ import annotations

import json

from snipleak import cli


def test_run_writes_report_and_transcript(tmp_path, capsys):
    config = tmp_path / "scenario.json"
    config.write_text(json.dumps({"attack": "applet", "mitigation": "no_snippets"}))
    report = tmp_path / "out.json"
    code = cli.main(["run", "--config", str(config), "--report", str(report)])
    assert code == cli.EXIT_OK
    payload = json.loads(report.read_text())
    assert payload["leak_class"] == "filenames"
    assert payload["transcript_digest"].startswith("sha256:")
    transcript = tmp_path / "out.transcript.jsonl"
    lines = transcript.read_text().strip().split("\n")
    assert all(json.loads(line) for line in lines)
    out = capsys.readouterr().out
    assert "filenames" in out


def test_run_seed_override_changes_id_not_outcome(tmp_path):
    config = tmp_path / "scenario.json"
    config.write_text(json.dumps({"attack": "applet"}))
    r1 = tmp_path / "r1.json"
    r2 = tmp_path / "r2.json"
    assert cli.main(["run", "--config", str(config), "--report", str(r1)]) == 0
    assert cli.main(["run", "--config", str(config), "--seed", "9",
                     "--report", str(r2)]) == 0
    one = json.loads(r1.read_text())
    two = json.loads(r2.read_text())
    assert one["leak_class"] == two["leak_class"] == "snippets"
    assert one["scenario_id"] != two["scenario_id"]


def test_bad_config_exits_2(tmp_path, capsys):
    missing = tmp_path / "nope.json"
    assert cli.main(["run", "--config", str(missing)]) == cli.EXIT_CONFIG
    bad = tmp_path / "bad.json"
    bad.write_text('{"attack": "wormhole"}')
    assert cli.main(["run", "--config", str(bad)]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "config.attack" in err
    notjson = tmp_path / "notjson.json"
    notjson.write_text("{{{{")
    assert cli.main(["run", "--config", str(notjson)]) == cli.EXIT_CONFIG


def test_matrix_check_passes_and_reports(tmp_path, capsys):
    report = tmp_path / "matrix.json"
    code = cli.main(["matrix", "--check", "--report", str(report)])
    assert code == cli.EXIT_OK
    cells = json.loads(report.read_text())["cells"]
    assert len(cells) == 10
    assert all(cell["ok"] for cell in cells)
    out = capsys.readouterr().out
    assert out.count(" ok") == 10
    assert "MISMATCH" not in out
