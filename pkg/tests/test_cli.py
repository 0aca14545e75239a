import json
import subprocess
import sys

import pytest

from vidskit.cli import main
from vidskit.scorer import bundled_scorecard


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_validate_pass(capsys, full_fixture):
    code, out, _ = run(capsys, "validate", full_fixture[0], "--profile", "full")
    assert code == 0
    assert out.strip().splitlines()[-1].strip() == "VALIDATION PASSED (21/21 rules)"


def test_validate_fail(capsys, full_copy):
    (full_copy / "README.md").unlink()
    code, out, _ = run(capsys, "validate", full_copy)
    assert code == 1 and "VALIDATION FAILED" in out


def test_validate_json(capsys, full_fixture):
    code, out, _ = run(capsys, "validate", full_fixture[0], "--json")
    assert code == 0 and json.loads(out)["Summary"]["Status"] == "PASS"


@pytest.mark.parametrize(
    "argv",
    [
        ("validate", ".", "--profile", "bogus"),
        (),
        ("frobnicate",),
        ("splits", "."),
        ("splits", ".", "--seed", "x"),
        ("splits", ".", "--seed", "1", "--ratios", "0.5,0.5"),
        ("scaffold", "x"),
    ],
)
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2 and "usage" in err


def test_operational_errors(capsys, tmp_path, poc_fixture):
    assert run(capsys, "validate", tmp_path / "missing")[0] == 3
    code, _, err = run(capsys, "export", poc_fixture[0], tmp_path / "o", "--layout", "training")
    assert code == 3 and "splits" in err
    assert run(capsys, "score", tmp_path / "nope.json")[0] == 3
    assert run(capsys, "mutate", poc_fixture[0], tmp_path / "m", "--rule", "Z001")[0] == 3


def test_scaffold_splits_quality_flow(capsys, tmp_path):
    ds = tmp_path / "ds"
    code, out, _ = run(capsys, "scaffold", ds, "--subjects", "5", "--profile", "full", "--seed", "3", "--json")
    assert code == 0 and json.loads(out)["n_subjects"] == 5
    code, out, _ = run(capsys, "quality", ds, "--json")
    assert code == 0 and json.loads(out)["Dataset"]["PairCount"] == 30
    code, out, _ = run(capsys, "splits", ds, "--seed", "9", "--json")
    assert code == 0 and json.loads(out)["Seed"] == 9
    assert run(capsys, "validate", ds)[0] == 0
    code, out, _ = run(capsys, "export", ds, tmp_path / "out", "--layout", "training", "--task", "Lung", "--json")
    assert code == 0 and len(json.loads(out)["Cases"]) == 5


def test_scaffold_poc_skeleton(capsys, tmp_path):
    code, out, _ = run(capsys, "scaffold", tmp_path / "p", "--subjects", "2")
    assert code == 0 and "2 subjects" in out
    assert run(capsys, "validate", tmp_path / "p")[0] == 0


def test_score(capsys, tmp_path):
    p = tmp_path / "brats.json"
    p.write_text(json.dumps(bundled_scorecard("BraTS").to_json()))
    code, out, _ = run(capsys, "score", p)
    assert code == 0 and out.strip().endswith("39%")
    code, out, _ = run(capsys, "score", p, "--json")
    assert json.loads(out)["Percent"] == 39


def test_mutate(capsys, full_fixture, tmp_path):
    code, out, _ = run(capsys, "mutate", full_fixture[0], tmp_path / "m", "--rule", "s004", "--json")
    assert code == 0 and json.loads(out)["Rule"] == "S004"
    assert run(capsys, "validate", tmp_path / "m")[0] == 1


def test_console_entry_point(full_fixture):
    proc = subprocess.run(
        [sys.executable, "-m", "vidskit.cli", "validate", str(full_fixture[0]), "--json"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["Summary"]["Total"] == 21
