import csv
import io
import json

import pytest

from main import main

MEAN_ARGS = ["-q", "mean-alg1", "--m", "8", "--T", "4", "--seed", "3", "--seeds", "2"]


def table(text):
    return list(csv.reader(io.StringIO(text)))


def test_mean_run_writes_one_row_per_seed(capsys):
    assert main(MEAN_ARGS) == 0
    rows = table(capsys.readouterr().out)
    assert rows[0] == ["seed", "T", "m", "d", "sq_error", "max_encoding_error", "compliance_ok"]
    assert [row[0] for row in rows[1:]] == ["3", "4"]
    assert all(row[6] == "true" for row in rows[1:])


def test_repeated_invocations_are_byte_identical(capsys):
    main(MEAN_ARGS)
    first = capsys.readouterr().out
    main(MEAN_ARGS)
    assert capsys.readouterr().out == first


def test_outputs_go_to_files(tmp_path, capsys):
    out, records = tmp_path / "runs.csv", tmp_path / "runs.jsonl"
    assert main(MEAN_ARGS + ["--check-compliance", "--out", str(out), "--json-out", str(records)]) == 0
    assert capsys.readouterr().out == ""
    assert len(table(out.read_text(encoding="utf-8"))) == 3
    lines = records.read_text(encoding="utf-8").splitlines()
    assert [json.loads(line)["seed"] for line in lines] == [3, 4]


def test_regression_run(capsys):
    assert main(["-q", "regress-alg2", "--d", "2", "--m", "32", "--k", "4", "--T", "3"]) == 0
    rows = table(capsys.readouterr().out)
    assert rows[0][:5] == ["seed", "T", "m", "d", "k"]
    assert rows[1][4] == "4"


@pytest.mark.parametrize("argv", [
    ["-q", "mean-alg1", "--m", "1"],
    ["-q", "mean-alg1", "--config", "does-not-exist.json"],
    ["-q", "mean-alg1", "--seeds", "0"],
    ["-q", "mean-improved", "--d", "3", "--m", "10"],
    ["-q", "rss-probe", "--n", "41", "--trials", "1"],
    [],
])
def test_configuration_errors_exit_with_two(argv, capsys):
    assert main(argv) == 2


def test_dp_demo(tmp_path, capsys):
    record = tmp_path / "dp.json"
    assert main(["-q", "dp-demo", "--json-out", str(record)]) == 0
    rows = table(capsys.readouterr().out)
    assert rows[0] == ["batch", "R_index", "target", "retained"]
    assert rows[2] == ["0 10 10", "2", "5", "0 10"]
    assert json.loads(record.read_text(encoding="utf-8"))["dp_demo"]["disjoint"] is True


def test_dp_demo_outlier_table(capsys):
    assert main(["-q", "dp-demo", "--outlier", "--rounds", "5"]) == 0
    rows = table(capsys.readouterr().out)
    assert rows[0] == ["round", "with_outlier", "without_outlier", "gap"]
    assert len(rows) == 6


def test_sgd_check(capsys):
    assert main(["-q", "sgd-check", "--T", "100", "--seeds", "20"]) == 0
    rows = table(capsys.readouterr().out)
    assert rows[0] == ["t", "mean_L", "bound"] and len(rows) == 101


def test_sgd_check_rejects_noise_over_budget(capsys):
    argv = ["-q", "sgd-check", "--T", "100", "--seeds", "5", "--noise-scale", "0.5"]
    assert main(argv) == 2
    assert main(argv + ["--budget-violating"]) == 0


def test_probes(capsys):
    assert main(["-q", "rss-probe", "--n", "1", "2", "--trials", "20"]) == 0
    assert len(table(capsys.readouterr().out)) == 3
    assert main(["-q", "lower-bound-probe", "--d", "1", "--m", "4", "--trials", "10"]) == 0
    rows = table(capsys.readouterr().out)
    assert rows[1][5] == ""
    assert main(["-q", "regress-density-probe", "--d", "2", "--k", "4", "--trials", "500", "--bins", "5"]) == 0
    assert len(table(capsys.readouterr().out)) == 6


def test_examples_lists_shipped_documents(capsys):
    assert main(["-q", "examples"]) == 0
    names = [row[0] for row in table(capsys.readouterr().out)[1:]]
    assert "mean_contaminated" in names and "sweep_T" in names


def test_sweep(tmp_path, capsys):
    spec = tmp_path / "sweep.json"
    spec.write_text(json.dumps({
        "base": {"m": 8, "T": 3},
        "axis": "m",
        "values": [6, 8],
        "seeds": 2,
        "algorithm": "alg1",
    }), encoding="utf-8")
    aggregates = tmp_path / "aggregates.jsonl"
    assert main(["-q", "sweep", str(spec), "--workers", "1", "--json-out", str(aggregates)]) == 0
    rows = table(capsys.readouterr().out)
    assert len(rows) == 1 + 4 + 4
    assert [json.loads(line)["value"] for line in aggregates.read_text(encoding="utf-8").splitlines()] == [6, 8]


def test_sweep_with_failing_cells_exits_with_one(tmp_path, capsys):
    spec = tmp_path / "sweep.json"
    spec.write_text(json.dumps({
        "base": {"m": 8, "T": 3, "distribution": {"variant": "point_mass", "theta": [0.0]}},
        "axis": "T",
        "values": [2],
        "seeds": 1,
        "algorithm": "alg2",
    }), encoding="utf-8")
    assert main(["-q", "sweep", str(spec), "--workers", "1"]) == 1
