import csv
import io
import json
import subprocess
import sys

import pytest

from dynmod.cli import git_blob_hash, main
from dynmod.presets import preset_path


def simulate(tmp_path, *args):
    out = tmp_path / "run"
    code = main(["simulate", *args, "--out", str(out)])
    return code, out


def test_simulate_preset_writes_csv_and_manifest(tmp_path, capsys):
    code, out = simulate(tmp_path, "fig3_filter_regulation", "--duration", "0.4")
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["exit_code"] == 0 and manifest["timing"]["rows"] == 21
    assert manifest["config_hash"] == git_blob_hash(preset_path("fig3_filter_regulation").read_bytes())
    assert (out / "trajectory.csv").read_text().count("\n") == 22
    assert "completed" in capsys.readouterr().out


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("DYNMOD_OUT", str(tmp_path / "root"))
    assert main(["simulate", "fig12_direct_adaptive", "--duration", "0.1"]) == 0
    assert (tmp_path / "root" / "fig12_direct_adaptive" / "trajectory.csv").exists()


def test_git_blob_hash_matches_git():
    assert git_blob_hash(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"
    assert git_blob_hash(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"


def test_bad_config_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(preset_path("fig3_filter_regulation").read_text().replace("K2: 2.0", "K2: 2.0\n  K3: 1.0"))
    line = bad.read_text().splitlines().index("  K3: 1.0") + 1
    code, _ = simulate(tmp_path, str(bad))
    assert code == 1
    assert f"{bad}:{line}: outer.K3: unknown key" in capsys.readouterr().err


def test_missing_config_exits_1(tmp_path, capsys):
    code, _ = simulate(tmp_path, "no_such_thing")
    assert code == 1 and "presets:" in capsys.readouterr().err


def test_usage_error_exits_1():
    with pytest.raises(SystemExit) as info:
        main(["simulate"])
    assert info.value.code == 1


def test_controller_error_exits_2(tmp_path, capsys):
    cfg = tmp_path / "singular.yaml"
    cfg.write_text(preset_path("fig3_filter_regulation").read_text() + "outer.sigma_min: 1.0e6\n")
    code, out = simulate(tmp_path, str(cfg), "--duration", "0.2")
    assert code == 2
    assert "SingularJacobianEstimate" in capsys.readouterr().err
    assert json.loads((out / "manifest.json").read_text())["exit_code"] == 2


def test_divergence_exits_3(tmp_path):
    code, out = simulate(tmp_path, "fig20_high_stiffness", "--substeps", "1", "--duration", "0.2")
    assert code == 3
    assert json.loads((out / "manifest.json").read_text())["exit_code"] == 3


def test_validate_passes(capsys):
    assert main(["validate", "--filter", "anchor"]) == 0
    assert "all 3 checks passed" in capsys.readouterr().out


def test_validate_failure_exits_4(capsys):
    assert main(["validate", "--filter", "regressor.dynamic", "--perturb-ad", "1e-3"]) == 4
    assert "regressor.dynamic" in capsys.readouterr().err


def test_validate_unknown_filter(capsys):
    assert main(["validate", "--filter", "zzz"]) == 1


def test_simulate_plotdata_round_trip(tmp_path, capsys):
    code, out = simulate(tmp_path, "fig21_pid_inner", "--duration", "0.4")
    assert code == 0
    capsys.readouterr()
    target = tmp_path / "fig22.csv"
    assert main(["plotdata", str(out / "trajectory.csv"), "--figure", "fig22", "--out", str(target)]) == 0
    rows = list(csv.DictReader(io.StringIO((out / "trajectory.csv").read_text())))
    sliced = list(csv.reader(io.StringIO(target.read_text())))
    assert sliced[0] == ["t", "qc_qr1", "qc_qr2", "qc_qr3"]
    assert len(sliced) == len(rows) + 1
    for row, got in zip(rows, sliced[1:]):
        assert got == [row["t"], row["qc_qr1"], row["qc_qr2"], row["qc_qr3"]]


def test_plotdata_header_only_to_stdout(tmp_path, capsys):
    src = tmp_path / "empty.csv"
    code, out = simulate(tmp_path, "fig3_filter_regulation", "--duration", "0.02")
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    src.write_text(header + "\n")
    capsys.readouterr()
    assert main(["plotdata", str(src), "--figure", "fig3"]) == 0
    assert capsys.readouterr().out == "t,dx1,dx2,dx3\n"


def test_plotdata_errors(tmp_path, capsys):
    assert main(["plotdata", str(tmp_path / "x.csv"), "--figure", "fig3"]) == 1
    assert main(["plotdata", str(tmp_path / "x.csv"), "--figure", "fig23"]) == 1
    assert "valid ids" in capsys.readouterr().err


def test_console_script_entry():
    res = subprocess.run([sys.executable, "-m", "dynmod.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("dynmod ")
