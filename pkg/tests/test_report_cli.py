import json
import subprocess
import sys

import pytest

from mmwbm.cli import main
from mmwbm.harness import MetricsRecord
from mmwbm.report import SEARCH_HEADER, SNR_HEADER, emit_results


def test_empty_records_give_headers_only(tmp_path):
    m = emit_results([], tmp_path)
    assert (tmp_path / "snr_vs_threshold.csv").read_text() == ",".join(SNR_HEADER) + "\n"
    assert (tmp_path / "searches_vs_threshold.csv").read_text() == ",".join(SEARCH_HEADER) + "\n"
    doc = json.loads((tmp_path / "manifest.json").read_text())
    assert sorted(doc["files"]) == sorted(m.files) == ["searches_vs_threshold.csv", "snr_vs_threshold.csv"]


def test_one_record_row_format(tmp_path):
    r = MetricsRecord("proposed", -1.0, 20.0, 21.5, 6.25, 0.8, 0.1234567, 0.05, 10)
    emit_results([r], tmp_path)
    lines = (tmp_path / "snr_vs_threshold.csv").read_text().splitlines()
    assert lines[1] == "proposed,-1.000000,20.000000,21.500000,0.123457,0.800000"
    lines = (tmp_path / "searches_vs_threshold.csv").read_text().splitlines()
    assert lines[1] == "proposed,-1.000000,20.000000,6.250000,0.050000"


def test_unwritable_directory(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError):
        emit_results([], blocker / "sub")


def test_sweep_trace(capsys):
    assert main(["sweep-trace", "--nu", "5", "--card", "17"]) == 0
    assert capsys.readouterr().out == "6 4 7 3 8 2 9 1 10 11 12 13 14 15 16 17\n"


def test_no_args_exit_2(capsys):
    assert main([]) == 2
    assert "usage" in capsys.readouterr().err


def test_unknown_subcommand_exit_2():
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 2


def test_error_is_one_line(capsys):
    assert main(["sweep-trace", "--nu", "0", "--card", "17"]) == 1
    err = capsys.readouterr().err
    assert err.count("\n") == 1 and err.startswith("error: ValueError:")


def test_codebook_inspect_lists_23_beams(capsys):
    assert main(["codebook", "inspect", "--step", "5"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "level,index,azimuth_deg,gain_db"
    beams = {tuple(l.split(",")[:2]) for l in lines[1:]}
    assert len(beams) == 23


def test_codebook_export_and_reuse(tmp_path, capsys):
    path = tmp_path / "cb.json"
    assert main(["codebook", "export", "--out", str(path)]) == 0
    assert main(["codebook", "build", "--codebook", str(path)]) == 0
    assert "total: 23 beams" in capsys.readouterr().out


def test_channel_draw(capsys):
    assert main(["channel", "draw", "--seed", "4"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["format"] == "mmwbm-channel/1" and len(doc["paths"]) == 40


def test_simulate_and_bad_config(tmp_path, capsys):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("n_trials: 2\nn_ttis_per_trial: 2\ngamma_th_db_grid: [20]\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "searches_vs_threshold.csv").read_text().splitlines()
    assert len(rows) == 1 + 4 * 2
    cfg.write_text("n_trials: -1\n")
    capsys.readouterr()
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "p")]) == 1
    assert "n_trials" in capsys.readouterr().err


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "mmwbm", "sweep-trace", "--nu", "17", "--card", "4"],
                         capture_output=True, text=True)
    assert out.returncode == 1 and out.stderr.startswith("error:")
