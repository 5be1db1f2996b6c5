import json
import shutil
import subprocess
import sys

import pytest

from pitwear.cli import EXIT_DATA, EXIT_EXCEEDED, EXIT_OK, EXIT_USAGE, run_command


@pytest.fixture(scope="module")
def measured(tmp_path_factory):
    """Seed-7 failure scenario over 120 drives, simulated and measured at low resolution."""
    root = tmp_path_factory.mktemp("cli") / "d"
    assert run_command(["simulate", "--seed", "7", "--drives", "120", "--out", str(root),
                        "--width", "324", "--height", "243"]) == EXIT_OK
    assert run_command(["measure", "--dataset", str(root)]) == EXIT_OK
    assert run_command(["track", "--dataset", str(root)]) == EXIT_OK
    return root


def test_eol_exceeded_at_final_drive(measured, capsys):
    assert run_command(["eol", "--dataset", str(measured), "--alpha", "1.0"]) == EXIT_EXCEEDED
    report = json.loads((measured / "out" / "eol_report.json").read_text())
    assert report["exceeded"] and report["at_drive"] == 119
    assert report["first_exceedance_drive"] < 119
    assert "EXCEEDED" in capsys.readouterr().out


def test_eol_unreachable_threshold(measured):
    assert run_command(["eol", "--dataset", str(measured), "--alpha", "1e9"]) == EXIT_OK
    assert not json.loads((measured / "out" / "eol_report.json").read_text())["exceeded"]


def test_eol_at_early_drive(measured):
    assert run_command(["eol", "--dataset", str(measured), "--alpha", "1", "--at-drive", "10"]) == EXIT_OK
    assert run_command(["eol", "--dataset", str(measured), "--alpha", "1", "--at-drive", "500"]) == EXIT_DATA


def test_eol_rejects_non_positive_alpha(measured):
    assert run_command(["eol", "--dataset", str(measured), "--alpha", "0"]) == EXIT_DATA


def test_analyze_does_not_need_eol(measured, tmp_path):
    root = tmp_path / "copy"
    shutil.copytree(measured, root, ignore=shutil.ignore_patterns("eol_report.json"))
    assert run_command(["analyze", "--dataset", str(root)]) == EXIT_OK
    doc = json.loads((root / "out" / "analysis.json").read_text())
    assert {"pit_count", "total_area"} <= set(doc["series"])
    assert set(doc["phase_fits"]) == {"pit_count", "total_area"}
    assert doc["lifetime"]["l10_revolutions"] == pytest.approx(15_625_000)
    assert (root / "out" / "series" / "pit_count.csv").is_file()
    assert not (root / "out" / "eol_report.json").exists()


def test_report_bundles_analysis_and_verdict(measured, tmp_path):
    root = tmp_path / "copy"
    shutil.copytree(measured, root)
    assert run_command(["report", "--dataset", str(root)]) == EXIT_OK
    doc = json.loads((root / "out" / "report.json").read_text())
    assert doc["eol"]["alpha"] == 1.0
    assert doc["summary"] == (root / "out" / "summary.txt").read_text()


def test_params_file(measured, tmp_path):
    root = tmp_path / "copy"
    shutil.copytree(measured, root)
    params = tmp_path / "params.json"
    params.write_text(json.dumps({"tracking": {"match_radius_mm": 0.8}, "eol": {"alpha": 2.0}}))
    assert run_command(["track", "--dataset", str(root), "--params", str(params)]) == EXIT_OK
    assert run_command(["report", "--dataset", str(root), "--params", str(params)]) == EXIT_OK
    assert json.loads((root / "out" / "eol_report.json").read_text())["alpha"] == 2.0
    params.write_text(json.dumps({"tracking": {"radius": 1}}))
    assert run_command(["track", "--dataset", str(root), "--params", str(params)]) == EXIT_DATA


def test_stages_are_idempotent(measured, tmp_path):
    root = tmp_path / "copy"
    shutil.copytree(measured, root)
    outputs = []
    for _ in range(2):
        assert run_command(["track", "--dataset", str(root)]) == EXIT_OK
        assert run_command(["analyze", "--dataset", str(root)]) == EXIT_OK
        outputs.append({p.name: p.read_bytes() for p in (root / "out").glob("*.json")})
    assert outputs[0] == outputs[1]


def test_measure_without_reference_drive(measured, tmp_path):
    root = tmp_path / "copy"
    shutil.copytree(measured, root)
    shutil.rmtree(root / "drives" / "drive_000000")
    assert run_command(["measure", "--dataset", str(root)]) == EXIT_DATA


def test_missing_dataset(tmp_path):
    assert run_command(["track", "--dataset", str(tmp_path / "nowhere")]) == EXIT_DATA


def test_track_before_measure(tmp_path, measured):
    root = tmp_path / "copy"
    shutil.copytree(measured, root, ignore=shutil.ignore_patterns("out"))
    assert run_command(["track", "--dataset", str(root)]) == EXIT_DATA


@pytest.mark.parametrize("argv", [[], ["bogus"], ["eol", "--dataset", "x"], ["measure", "--dataset", "x", "--nope"]])
def test_usage_errors(argv, capsys):
    assert run_command(argv) == EXIT_USAGE
    assert "usage" in capsys.readouterr().err


def test_console_entry_point():
    out = subprocess.run([sys.executable, "-m", "pitwear", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    assert "simulate" in out.stdout
