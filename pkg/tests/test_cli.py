import csv
import json
import subprocess
import sys

import pytest

from taskbeam.cli import bundled_configs, main
from taskbeam.experiments import CSV_HEADER

REF = "reference"


def small_sweep(tmp_path, axis="bits", values="[8, 16]"):
    path = tmp_path / "small.toml"
    path.write_text(
        f'scenario_file = "{_bundled(REF)}"\nseed = 5\nn_trials = 2000\n\n'
        f"[design]\nmax_iters = 100\n\n[sweep]\naxis = \"{axis}\"\nvalues = {values}\n"
    )
    return path


def _bundled(name):
    from taskbeam.cli import resolve_config

    return resolve_config(name).as_posix()


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_bundled_configs_present():
    names = bundled_configs()
    for name in ("reference", "second_setup", "fig6", "fig7", "fig8", "fig11", "fig12", "table1"):
        assert name in names


def test_design_writes_outputs(tmp_path):
    assert main(["design", "--config", REF, "--out-dir", str(tmp_path), "--trials", "2000"]) == 0
    summary = json.loads((tmp_path / "design_summary.json").read_text())
    assert summary["total_bits"] == 16 and summary["levels"] == 16
    assert summary["mse_analytic"] > summary["mmse_floor"]
    assert "mse_monte_carlo" in summary
    assert json.loads((tmp_path / "design.json").read_text())["combiner"]


def test_design_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert main(["design", "--config", REF, "--out-dir", str(d), "--trials", "2000"]) == 0
    assert (a / "design.json").read_bytes() == (b / "design.json").read_bytes()
    assert (a / "design_summary.json").read_bytes() == (b / "design_summary.json").read_bytes()


def test_design_with_mismatch_file(tmp_path):
    mm = tmp_path / "mm.toml"
    mm.write_text("i_gain = 0.05\nq_phase_deg = 3.0\n")
    out = tmp_path / "out"
    assert main(["design", "--config", REF, "--out-dir", str(out), "--mismatch-file", str(mm)]) == 0
    assert (out / "design.json").exists()


def test_missing_config_exit_code(tmp_path, capsys):
    assert main(["design", "--config", "no_such_config", "--out-dir", str(tmp_path)]) == 2
    assert "config not found" in capsys.readouterr().err


def test_bad_adc_flags_exit_code(tmp_path):
    assert main(["design", "--config", REF, "--out-dir", str(tmp_path), "--levels", "2", "--eta", "4"]) == 2


def test_bad_mismatch_file_exit_code(tmp_path):
    assert main(["design", "--config", REF, "--out-dir", str(tmp_path), "--mismatch-file", str(tmp_path / "nope.toml")]) == 2


def test_sweep_needs_sweep_table(tmp_path):
    assert main(["sweep", "--config", REF, "--out-dir", str(tmp_path)]) == 2


def test_sweep_bits_golden_header(tmp_path):
    cfg = small_sweep(tmp_path)
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(out), "--threads", "2"]) == 0
    rows = read_csv(out / "sweep_bits.csv")
    assert tuple(rows[0]) == CSV_HEADER
    assert [r[0] for r in rows[1:]] == sorted((r[0] for r in rows[1:]), key=float)
    variants = {r[1] for r in rows[1:]}
    assert {"no_quant", "task_agnostic", "task_specific"} <= variants
    assert any(r[1] == "fully_digital" and float(r[0]) == 16 for r in rows[1:])
    assert not any(r[1] == "fully_digital" and float(r[0]) == 8 for r in rows[1:])
    manifest = json.loads((out / "sweep_bits.json").read_text())
    assert manifest["rows"] == len(rows) - 1


def test_sweep_thread_count_does_not_change_output(tmp_path):
    cfg = small_sweep(tmp_path, axis="snr_db", values="[0.0, 5.0]")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(a), "--threads", "1"]) == 0
    assert main(["sweep", "--config", str(cfg), "--out-dir", str(b), "--threads", "3"]) == 0
    assert (a / "sweep_snr_db.csv").read_bytes() == (b / "sweep_snr_db.csv").read_bytes()


def test_power_prints_table(capsys, tmp_path):
    assert main(["power", "--out-dir", str(tmp_path)]) == 0
    text = capsys.readouterr().out
    for value in ("520", "410", "172"):
        assert value in text
    rows = read_csv(tmp_path / "power.csv")
    assert [float(r[1]) for r in rows[1:]] == [520.0, 410.0, pytest.approx(172.0)]


def test_power_degenerate_flags_match_conventional(capsys):
    assert main(["power", "--gamma-sp", "1", "--vm-power", "20", "--adc-power", "10"]) == 0
    line = [ln for ln in capsys.readouterr().out.splitlines() if ln.startswith("task_specific")][0]
    assert float(line.split()[1]) == 410


def test_power_rejects_bad_fraction():
    assert main(["power", "--gamma-sp", "2"]) == 2


@pytest.mark.slow
def test_af_second_setup(tmp_path):
    assert main(["af", "--config", "second_setup", "--out-dir", str(tmp_path)]) == 0
    rows = read_csv(tmp_path / "af.csv")
    assert tuple(rows[0]) == ("variant", "angle_deg", "chain", "af_abs_db")
    att = read_csv(tmp_path / "af_attenuation.csv")
    assert att[0][:2] == ["variant", "chain"]
    assert {r[0] for r in att[1:]} == {"task_specific", "robust", "task_agnostic"}


def test_module_entry_point_help():
    proc = subprocess.run([sys.executable, "-m", "taskbeam.cli", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert "design" in proc.stdout and "sweep" in proc.stdout
