import json
from pathlib import Path

import jsonschema
import pytest

from evtolprop.cli import main

from variants import bundled_text, single_drive_text

SCHEMA = json.loads((Path(__file__).parents[1] / "docs" / "report.schema.json").read_text())
MODEL = "examples/horizonuam.adl"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def single_drive(tmp_path_factory):
    path = tmp_path_factory.mktemp("models") / "single.adl"
    path.write_text(single_drive_text())
    return str(path)


def test_validate_bundled(capsys):
    code, out, _ = run(capsys, "validate", MODEL)
    assert code == 0
    assert "validation: pass" in out


def test_validate_reports_violations(capsys, single_drive):
    code, out, _ = run(capsys, "validate", single_drive)
    assert code == 1
    assert "requirement 1 (rotor_1)" in out


def test_safety_pass_and_fail(capsys, single_drive):
    code, out, _ = run(capsys, "safety", MODEL, "--trials", "2000")
    assert code == 0
    assert "Loss of one rotor lift" in out
    code, out, _ = run(capsys, "safety", single_drive, "--trials", "2000")
    assert code == 1
    assert "compliance failure: Loss of one rotor lift" in out


def test_cutsets(capsys):
    code, out, _ = run(capsys, "cutsets", MODEL, "--tree", "single_drive", "--top", "3")
    assert code == 0
    lines = [l for l in out.splitlines() if l[:1].isdigit()]
    assert len(lines) == 3 and lines[0].split()[-1] == "bat_1"


def test_size_battery(capsys):
    code, out, _ = run(capsys, "size-battery", MODEL)
    assert code == 0
    assert "167s x 15p = 2505 cells" in out
    assert "167s x 31p = 5177 cells" in out


def test_simulate_mission_writes_a_trace(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "mission", MODEL, "--failure", "battery:bat_1@2342", "-o", str(tmp_path))
    assert code == 0
    header = (tmp_path / "mission_trace.csv").read_text().splitlines()[0]
    assert header == "time_s,pack_id,power_w,energy_wh,soc"


def test_simulate_thermal(capsys, tmp_path):
    code, out, _ = run(capsys, "simulate", "thermal", MODEL, "--failure", "drive-unit@2342", "-o", str(tmp_path))
    assert code == 0
    assert (tmp_path / "thermal_drive.csv").exists()
    code, out, _ = run(capsys, "simulate", "thermal", MODEL, "--mode", "air-only")
    assert code == 1
    assert "motor_max" in out or "violation" in out


@pytest.mark.parametrize("argv", [
    ["validate", "does/not/exist.adl"],
    ["validate", MODEL, "--bogus"],
    ["cutsets", MODEL, "--tree", "no_such_tree"],
    ["simulate", "mission", MODEL, "--failure", "battery:bat_9@10"],
    ["simulate", "mission", MODEL, "--failure", "meteor@10"],
    ["safety", MODEL, "--trials", "0"],
    ["safety", MODEL, "--seed", "-1"],
])
def test_usage_and_input_errors_exit_2(capsys, argv):
    code, _, _ = run(capsys, *argv)
    assert code == 2


def test_parse_errors_exit_2_with_spans(capsys, tmp_path):
    bad = tmp_path / "bad.adl"
    bad.write_text("[components]\nx Toaster { }\n")
    code, _, err = run(capsys, "validate", str(bad))
    assert code == 2
    assert f"{bad}:2:" in err
    empty = tmp_path / "empty.adl"
    empty.write_text("")
    assert run(capsys, "validate", str(empty))[0] == 2


def test_missing_sections_exit_2(capsys, tmp_path):
    text = bundled_text()
    path = tmp_path / "no_cells.adl"
    path.write_text(text[:text.index("[cells]")] + text[text.index("[powertrain]"):])
    code, _, err = run(capsys, "size-battery", str(path))
    assert code == 2
    assert "[cells]" in err


def test_resource_limit_exits_3(capsys, tmp_path):
    names = [f"s{i}" for i in range(22)]
    text = "[components]\nbat_1 Battery { }\n[fault_trees]\n" + "".join(
        f"{n} BasicEvent {{ probability = 0.01 }}\n" for n in names)
    text += f"gate l = OR({', '.join(names)})\ngate r = OR({', '.join(names)})\ngate top = AND(l, r)\n"
    text += "big FaultTree { top = top }\n"
    path = tmp_path / "big.adl"
    path.write_text(text)
    code, _, err = run(capsys, "safety", str(path), "--trials", "10")
    assert code == 3
    assert "resource limit" in err


@pytest.fixture(scope="module")
def report_dirs(tmp_path_factory):
    dirs = []
    for _ in range(2):
        d = tmp_path_factory.mktemp("report")
        assert main(["report", MODEL, "--format", "json", "-o", str(d), "--trials", "20000"]) == 0
        dirs.append(d)
    return dirs


def test_report_is_byte_identical_across_runs(report_dirs):
    a, b = (d / "report.json" for d in report_dirs)
    assert a.read_bytes() == b.read_bytes()


def test_report_matches_the_schema(report_dirs):
    rep = json.loads((report_dirs[0] / "report.json").read_text())
    jsonschema.validate(rep, SCHEMA)
    assert rep["verdict"]["status"] == "pass"
    assert rep["options"]["seed"] == 42


def test_markdown_and_csv_reports(tmp_path):
    assert main(["report", MODEL, "--format", "md", "-o", str(tmp_path / "md"), "--trials", "2000"]) == 0
    md = (tmp_path / "md" / "report.md").read_text()
    assert md.startswith("#") and "verdict" in md.lower()
    assert main(["report", MODEL, "--format", "csv", "-o", str(tmp_path / "csv"), "--trials", "2000"]) == 0
    files = sorted(p.name for p in (tmp_path / "csv").iterdir())
    assert files and all(f.endswith(".csv") for f in files)


def test_report_fails_for_the_single_drive_model(capsys, tmp_path, single_drive):
    code, out, _ = run(capsys, "report", single_drive, "--trials", "2000", "-o", str(tmp_path))
    assert code == 1
    assert "verdict: fail" in out
