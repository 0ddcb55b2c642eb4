import subprocess
import sys

import pytest

from fuzzypsu.cli import UsageError, main, parse_sweep
from fuzzypsu.geometry import fuzzy_union_oracle, read_dataset
from fuzzypsu.harness import CSV_COLUMNS


def test_parse_sweep():
    assert parse_sweep("n=8..64") == ("n", [8, 16, 32, 64])
    assert parse_sweep("delta=1,2,4") == ("delta", [1, 2, 4])
    for bad in ("q=1..2", "n=8..4", "n=", "n=0..4"):
        with pytest.raises(UsageError):
            parse_sweep(bad)


def test_run_prints_union_and_writes_csv(tmp_path, capsys):
    out = tmp_path / "t.csv"
    ds = tmp_path / "ds.txt"
    assert main(["gen", "--variant", "ng", "--n", "16", "--m", "4", "--d", "3", "--delta", "2",
                 "--seed", "7", "--out", str(ds)]) == 0
    capsys.readouterr()
    assert main(["run", "--variant", "ng", "--n", "16", "--m", "4", "--d", "3", "--delta", "2",
                 "--seed", "7", "--out", str(out)]) == 0
    printed = capsys.readouterr().out.splitlines()
    X, Y = read_dataset(ds)
    assert {tuple(map(int, ln.split())) for ln in printed} == fuzzy_union_oracle(X, Y)
    rows = out.read_text().splitlines()
    assert rows[0] == "index,phase,direction,tag,bytes,ciphertexts"
    assert [r.split(",")[3] for r in rows[1:]] == ["SETUP-R", "SETUP-S", "QUERY", "RESP", "RESULT"]


def test_run_from_file(tmp_path, capsys):
    ds = tmp_path / "ds.txt"
    assert main(["gen", "--variant", "str", "--n", "8", "--d", "3", "--seed", "2", "--out", str(ds)]) == 0
    assert main(["run", "--variant", "str", "--input", str(ds), "--out", str(tmp_path / "t.csv")]) == 0
    X, Y = read_dataset(ds)
    lines = capsys.readouterr().out.splitlines()[1:]
    assert {tuple(map(int, ln.split())) for ln in lines} == fuzzy_union_oracle(X, Y)


def test_cli_is_deterministic(tmp_path, capsys):
    outs = []
    for k in range(2):
        path = tmp_path / f"t{k}.csv"
        assert main(["run", "--variant", "lay", "--n", "8", "--seed", "3", "--out", str(path)]) == 0
        outs.append((capsys.readouterr().out, path.read_bytes()))
    assert outs[0] == outs[1]


def test_bench_sweep(capsys):
    assert main(["bench", "--variant", "ng", "--sweep", "n=8..32", "--jobs", "1"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert [ln.split(",")[1] for ln in lines[1:]] == ["8", "16", "32"]


def test_verify_exit_codes(capsys):
    assert main(["verify", "--variant", "nf", "--trials", "3", "--jobs", "1"]) == 0
    assert "nf: 3/3 trials match" in capsys.readouterr().out
    assert main(["verify", "--trials", "1"]) == 2


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main(["run"])
    assert e.value.code != 0
    assert main(["run", "--variant", "lay", "--scheme", "lhe"]) == 1
    assert "cannot" in capsys.readouterr().err
    assert main(["gen", "--out", "/nonexistent/x"]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "fuzzypsu", "verify", "--variant", "ng",
                           "--trials", "2", "--jobs", "2"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "ng: 2/2 trials match" in proc.stdout
