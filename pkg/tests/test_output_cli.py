import csv
import json
import subprocess
import sys
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from quadformation import preset, run
from quadformation.cli import EXIT_ABORTED, EXIT_INVALID, EXIT_OK, main
from quadformation.controller import ControllerGains
from quadformation.output import csv_header, summary_dict, trace_table, write_plots, write_trace_csv
from quadformation.plant import QuadState
from quadformation.simulation import monitors

SVG = "{http://www.w3.org/2000/svg}"


@pytest.fixture(scope="module")
def short_trace():
    return run(preset(1, t_final=2.0, record_stride=10))


def test_header_layout():
    header = csv_header(4)
    assert len(header) == 1 + 4 * (12 + 4 + 9 + 1) + 2 == 107
    assert header[0] == "t" and header[-2:] == ["W", "W_bound"]
    assert header[1:13] == [f"a1_{f}" for f in QuadState.field_names()]
    assert header[17:26] == ["a1_pid_x", "a1_pid_y", "a1_pid_z", "a1_vid_x", "a1_vid_y", "a1_vid_z",
                             "a1_aid_x", "a1_aid_y", "a1_aid_z"]
    assert len(set(header)) == len(header)


def test_csv_round_trips_exactly(short_trace, tmp_path):
    path = write_trace_csv(short_trace, tmp_path / "trace.csv")
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == csv_header(4)
    parsed = np.array([[float(v) for v in r] for r in rows[1:]])
    assert np.array_equal(parsed, trace_table(short_trace))
    assert len(rows) - 1 == len(short_trace)


def test_csv_columns_match_trace(short_trace):
    table = trace_table(short_trace)
    header = csv_header(4)
    col = {name: k for k, name in enumerate(header)}
    assert np.array_equal(table[:, col["a3_psi"]], short_trace.attitudes[:, 2, 2])
    assert np.array_equal(table[:, col["a2_u1"]], short_trace.controls[:, 1, 0])
    assert np.array_equal(table[:, col["a4_vid_y"]], short_trace.reference[:, 3, 6])
    assert np.array_equal(table[:, col["a1_eta_norm"]], short_trace.formation_error_norm[:, 0])
    assert np.all(table[:, col["W"]] <= table[:, col["W_bound"]])


def test_summary_is_json(short_trace):
    summary = summary_dict(short_trace, monitors(short_trace))
    text = json.dumps(summary, allow_nan=False)
    back = json.loads(text)
    assert back["samples"] == len(short_trace) and back["completed"]
    assert back["monitors"]["checks"]["fl_exactness"] is None


def test_plots_are_well_formed_svg(short_trace, tmp_path):
    paths = write_plots(short_trace, tmp_path)
    assert sorted(p.name for p in paths) == ["attitudes.svg", "error_norm.svg", "path.svg"]
    for p in paths:
        root = ET.parse(p).getroot()
        assert root.tag == f"{SVG}svg"
        assert len(root.findall(f".//{SVG}polyline")) >= 4


def read_bytes(path):
    return path.read_bytes()


def test_cli_preset_run(tmp_path):
    out = tmp_path / "out"
    assert main(["--preset", "2", "--t-final", "2", "--out", str(out)]) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == [
        "attitudes.svg", "error_norm.svg", "path.svg", "summary.json", "trace.csv"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["scenario"] == "case2" and summary["t_end"] == 2.0


def test_cli_plots_off(tmp_path):
    assert main(["--preset", "1", "--t-final", "0.5", "--plots", "off", "--out", str(tmp_path)]) == EXIT_OK
    assert sorted(p.name for p in tmp_path.iterdir()) == ["summary.json", "trace.csv"]


def test_cli_validate_only_writes_nothing(tmp_path, capsys):
    out = tmp_path / "none"
    assert main(["--preset", "1", "--mode", "validate-only", "--out", str(out)]) == EXIT_OK
    assert not out.exists()
    assert "case1: valid" in capsys.readouterr().out


def test_cli_bad_gains_exit_2(tmp_path, capsys):
    path = tmp_path / "bad_gains.json"
    preset(1, controller_gains=ControllerGains(k1z=9.0)).to_json(path)
    assert main(["--scenario", str(path), "--out", str(tmp_path / "o")]) == EXIT_INVALID
    err = capsys.readouterr().err
    assert "k1z + k3z < g - sup|z_id''|" in err


def test_cli_bad_observer_gain_names_inequality(tmp_path, capsys):
    data = preset(1).to_dict()
    data["observer_gains"]["g1"] = 1.0
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(data))
    assert main(["--scenario", str(path)]) == EXIT_INVALID
    assert "g2*g3 > g1" in capsys.readouterr().err


def test_cli_unreadable_scenario(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    assert main(["--scenario", str(path)]) == EXIT_INVALID


def test_cli_abort_exit_3_keeps_partial_trace(tmp_path):
    data = preset(2).to_dict()
    data["initial"][0]["thetadot"] = 1000.0
    path = tmp_path / "spin.json"
    path.write_text(json.dumps(data))
    out = tmp_path / "o"
    assert main(["--scenario", str(path), "--t-final", "1", "--out", str(out)]) == EXIT_ABORTED
    summary = json.loads((out / "summary.json").read_text())
    assert not summary["completed"] and "singularity" in summary["error"]
    assert (out / "trace.csv").read_text().count("\n") >= 2


@pytest.mark.parametrize("argv", [["--preset", "2", "--dt", "-1"], ["--preset", "3"], [],
                                  ["--preset", "1", "--scenario", "x.json"], ["--preset", "1", "--plots", "maybe"]])
def test_cli_argument_errors(argv):
    with pytest.raises(SystemExit) as err:
        main(argv)
    assert err.value.code == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "quadformation", "--preset", "1", "--mode", "validate-only"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "valid" in proc.stdout


def test_cli_output_is_reproducible(tmp_path):
    for name in ("a", "b"):
        assert main(["--preset", "1", "--t-final", "1", "--plots", "off", "--out", str(tmp_path / name)]) == 0
    assert read_bytes(tmp_path / "a" / "trace.csv") == read_bytes(tmp_path / "b" / "trace.csv")
