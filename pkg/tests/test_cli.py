import subprocess
import sys

import pytest

from cbm_leakage import harness
from cbm_leakage.cli import cli_main, main


def test_run_writes_one_row(tmp_path):
    out = tmp_path / "r.csv"
    code = main(["run", "--dataset", "blobs", "--mode", "soft", "--repeats", "2",
                 "--seed", "0", "--epochs", "2", "--out", str(out)])
    assert code == 0
    rows = harness.read_results_csv(out)
    assert len(rows) == 1 and rows[0]["algorithm"] == "NN+Soft"


def test_markdown_to_stdout(capsys):
    assert main(["run", "--dataset", "blobs", "--mode", "hard", "--repeats", "1",
                 "--epochs", "1", "--format", "markdown"]) == 0
    assert capsys.readouterr().out.startswith("| Dataset | Algorithm |")


def test_unknown_flag_exits_2(capsys):
    assert cli_main(["run", "--dataset", "blobs", "--mode", "soft", "--bogus"]) == 2
    assert "usage" in capsys.readouterr().err
    assert cli_main(["run", "--dataset", "nope", "--mode", "soft"]) == 2
    with pytest.raises(SystemExit):
        main([])


def test_missing_mnist_exits_1(monkeypatch, capsys):
    monkeypatch.delenv("MNIST_DIR", raising=False)
    assert main(["run", "--dataset", "paritymnist", "--mode", "soft"]) == 1
    assert "MNIST" in capsys.readouterr().err


def test_bad_value_exits_1():
    assert main(["run", "--dataset", "blobs", "--mode", "soft", "--threshold", "2"]) == 1


def test_grid_rows(tmp_path, fake_mnist_dir):
    out = tmp_path / "all.csv"
    code = main(["grid", "--seed", "0", "--out", str(out), "--blob-repeats", "1",
                 "--mnist-repeats", "1", "--epochs", "1", "--mcd-samples", "2",
                 "--mnist-dir", str(fake_mnist_dir)])
    assert code == 0
    assert len(harness.read_results_csv(out)) == 24


def test_plot_projection(tmp_path):
    out = tmp_path / "p.csv"
    assert main(["plot-projection", "--dataset", "blobs", "--seed", "2", "--out", str(out)]) == 0
    w, b, rows = harness.read_projection(out)
    assert w.shape == (1, 2) and len(rows) == 2000


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "cbm_leakage", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "plot-projection" in proc.stdout
