import csv
import subprocess
import sys

import pytest

from catso.cli import main
from catso.environments import write_csv

from conftest import make_linear_dataset


@pytest.fixture
def data(tmp_path):
    return write_csv(make_linear_dataset(T=120, N=6, K=3, n_observed=1), tmp_path / "toy.csv")


def test_run_writes_outputs(data, tmp_path, capsys):
    out = tmp_path / "res"
    code = main(["run", "-q", "--dataset", str(data), "--groups", str(data.with_suffix(".groups")),
                 "--policy", "catso,tsrc", "--budget", "2", "--runs", "2", "--out", str(out)])
    assert code == 0
    with (out / "summary.csv").open() as fh:
        assert len(list(csv.DictReader(fh))) == 2
    assert len((out / "runs.jsonl").read_text().splitlines()) == 4
    assert capsys.readouterr().out.startswith("dataset\tpolicy\tU\tS")


def test_config_file_with_flag_override(data, tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(f"dataset = {data}\ngroups = {data.with_suffix('.groups')}\npolicy = tsrc\nbudget = 1\nruns = 5\nout = {tmp_path / 'o'}\n")
    assert main(["run", "-q", "--config", str(cfg), "--runs", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].split("\t")[6] == "1"
    assert (tmp_path / "o" / "summary.csv").exists()


def test_v_sweep_with_best_v(data, capsys):
    assert main(["run", "-q", "--dataset", str(data), "--groups", str(data.with_suffix(".groups")),
                 "--budget", "1", "--runs", "1", "--v", "sweep", "--best-v"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["run"],  # no dataset
        ["run", "--dataset", "{data}", "--budget", "99"],
        ["run", "--dataset", "{data}", "--policy", "ucb"],
        ["run", "--dataset", "{data}", "--runs", "0"],
        ["run", "--dataset", "{data}", "--config", "/nonexistent.cfg"],
        ["synth", "--out", "x.csv", "--group-sizes", "3"],
    ],
)
def test_config_errors_exit_1(argv, data):
    assert main([a.replace("{data}", str(data)) for a in argv]) == 1


def test_usage_errors_exit_1():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--bogus-flag"])
    assert exc.value.code == 1


def test_data_errors_exit_2(tmp_path):
    assert main(["run", "--dataset", str(tmp_path / "missing.csv")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("a,label\n1,0\nx,1\n")
    assert main(["run", "--dataset", str(bad)]) == 2


def test_numerical_failure_exits_3(data, monkeypatch):
    from catso import harness
    from catso.errors import NumericalError

    def boom(*a, **kw):
        raise NumericalError("precision matrix lost definiteness")

    monkeypatch.setattr(harness, "run_once", boom)
    assert main(["run", "-q", "--dataset", str(data), "--groups", str(data.with_suffix(".groups")), "--budget", "1", "--runs", "1"]) == 3


def test_synth_writes_loadable_dataset(tmp_path, capsys):
    out = tmp_path / "skills.csv"
    assert main(["synth", "--events", "40", "--group-sizes", "2,3,1", "--query-dim", "4", "--out", str(out)]) == 0
    assert out.exists() and out.with_suffix(".groups").exists()
    assert main(["run", "-q", "--dataset", str(out), "--groups", str(out.with_suffix(".groups")), "--budget", "1", "--runs", "1"]) == 0


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "catso", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "synth" in proc.stdout
