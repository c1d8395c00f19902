import csv
import json

import numpy as np
import pytest

from tensorcs.cli import main, parse_grid
from tensorcs.tensor import read_ten1, write_ten1


def run(*args):
    return main([str(a) for a in args])


def test_psnr_identical_prints_inf(tmp_path, capsys):
    write_ten1(tmp_path / "x.ten", np.arange(1.0, 9.0).reshape(2, 2, 2))
    assert run("psnr", "--ref", tmp_path / "x.ten", "--test", tmp_path / "x.ten") == 0
    assert capsys.readouterr().out.strip() == "inf"


def test_two_mode_pipeline_exact(tmp_path, capsys):
    x, m, y = tmp_path / "x.ten", tmp_path / "meas", tmp_path / "y.ten"
    assert run("gen", "--dims", "20,24,12", "--ranks", "3,4,12", "--epsilon", 0, "--seed", 5, "--out", x) == 0
    assert run("sense", "--input", x, "--ranks", "3,4", "--kind", "gaussian", "--mode", "two-mode",
               "--seed", 6, "--out", m) == 0
    assert json.loads((m / "manifest.json").read_text())["kinds"][2] == "identity"
    assert run("reconstruct", "--meas", m, "--tau", 0, "--out", y, "--report", tmp_path / "r.json") == 0
    assert run("psnr", "--ref", x, "--test", y) == 0
    assert float(capsys.readouterr().out) > 180
    rep = json.loads((tmp_path / "r.json").read_text())
    assert rep["truncation_counts"] == [0, 0, 0]


def test_two_mode_with_synthetic_r3(tmp_path, capsys):
    x, m, y = tmp_path / "x.ten", tmp_path / "meas", tmp_path / "y.ten"
    run("gen", "--dims", "16,18,14", "--ranks", "3,4,5", "--seed", 1, "--out", x)
    assert run("sense", "--input", x, "--ranks", "3,4", "--mode", "two-mode", "--r3", 5, "--kind", "bernoulli",
               "--seed", 2, "--out", m) == 0
    assert json.loads((m / "manifest.json").read_text())["ranks"] == [3, 4, 5]
    assert run("reconstruct", "--meas", m, "--tau", 0, "--out", y) == 0
    run("psnr", "--ref", x, "--test", y)
    assert float(capsys.readouterr().out) > 180


def test_multiway_pipeline_auto_epsilon(tmp_path):
    x, m, y = tmp_path / "x.ten", tmp_path / "meas", tmp_path / "y.ten"
    run("gen", "--dims", "10,11", "--ranks", "3,3", "--epsilon", 1e-3, "--seed", 1, "--out", x)
    assert run("sense", "--input", x, "--ranks", "3,3", "--seed", 2, "--out", m) == 0
    assert run("reconstruct", "--meas", m, "--auto-epsilon", 1e-3, "--out", y) == 0
    assert read_ten1(y).shape == (10, 11)


def test_gen_from_source(tmp_path):
    src = tmp_path / "src.ten"
    write_ten1(src, np.random.default_rng(0).standard_normal((6, 7, 5)))
    assert run("gen", "--dims", "6,7,5", "--ranks", "2,2,2", "--seed", 0, "--source", src, "--als-max-iters", 5,
               "--out", tmp_path / "x.ten") == 0


@pytest.mark.parametrize("argv", [
    ["gen", "--dims", "4,4", "--ranks", "x", "--seed", "1", "--out", "o.ten"],
    ["gen", "--dims", "4,4", "--ranks", "2,2", "--seed", "-3", "--out", "o.ten"],
    ["gen", "--dims", "4,4", "--ranks", "2", "--seed", "1", "--out", "o.ten"],
    ["reconstruct", "--meas", "nowhere", "--tau", "0", "--auto-epsilon", "1", "--out", "o.ten"],
    ["bench", "--sweep", "sideways", "--grid", "0:1:1", "--trials", "1", "--seed", "0", "--config", "c", "--out", "o"],
    ["frobnicate"],
])
def test_usage_errors_exit_1(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    with pytest.raises(SystemExit) as exc:
        rc = main(argv)
        raise SystemExit(rc)
    assert exc.value.code == 1
    assert capsys.readouterr().err


def test_missing_input_exit_1(tmp_path, capsys):
    assert run("reconstruct", "--meas", tmp_path / "none", "--tau", 0, "--out", tmp_path / "o.ten") == 1


def test_numerical_failure_exit_2(tmp_path, capsys):
    x, m = tmp_path / "x.ten", tmp_path / "meas"
    run("gen", "--dims", "6,7,5", "--ranks", "2,2,5", "--seed", 1, "--out", x)
    run("sense", "--input", x, "--ranks", "2,2", "--mode", "two-mode", "--seed", 1, "--out", m)
    y1 = read_ten1(m / "Y1.ten")
    write_ten1(m / "Y1.ten", y1 + 1.0)  # corrupt one projection; assembly cross-check must fail
    assert run("reconstruct", "--meas", m, "--tau", 0, "--out", tmp_path / "o.ten") == 2
    assert "numerical" in capsys.readouterr().err


def test_parse_grid():
    assert parse_grid("0:1:0.25") == [0, 0.25, 0.5, 0.75, 1.0]
    assert parse_grid("0.1:0.3:0.1") == [0.1, 0.2, 0.3]


def bench(tmp_path, name, sweep, grid, cfg, seed=3, jobs=1):
    c = tmp_path / "cfg.json"
    c.write_text(json.dumps(cfg))
    out = tmp_path / name
    assert run("bench", "--sweep", sweep, f"--grid={grid}", "--trials", 6, "--seed", seed, "--config", c,
               "--out", out, "--jobs", jobs) == 0
    return out


CFG3 = {"dims": [24, 24, 6], "ranks": [3, 3, 6], "epsilon": 1e-3, "kinds": ["gaussian", "gaussian", "identity"]}


def test_bench_byte_identical(tmp_path):
    a = bench(tmp_path, "a.csv", "tau", "0:0.02:0.01", CFG3)
    b = bench(tmp_path, "b.csv", "tau", "0:0.02:0.01", CFG3, jobs=3)
    assert a.read_bytes() == b.read_bytes()
    c = bench(tmp_path, "c.csv", "tau", "0:0.02:0.01", CFG3, seed=4)
    assert a.read_bytes() != c.read_bytes()


def test_bench_delta_psnr_non_decreasing(tmp_path):
    out = bench(tmp_path, "d.csv", "delta", "0.3:0.9:0.15", CFG3)
    rows = list(csv.DictReader(out.open()))
    values = sorted({float(r["value"]) for r in rows})
    means = [np.mean([float(r["psnr_db"]) for r in rows if float(r["value"]) == v]) for v in values]
    assert all(b >= a for a, b in zip(means, means[1:])), means


def test_bench_log_grid(tmp_path):
    out = bench(tmp_path, "e.csv", "epsilon", "-4:-2:1", dict(CFG3, grid_log10=True))
    values = sorted({float(r["value"]) for r in csv.DictReader(out.open())})
    assert values == pytest.approx([1e-4, 1e-3, 1e-2])


def test_bench_bad_config(tmp_path):
    c = tmp_path / "cfg.json"
    c.write_text(json.dumps({"dims": [4, 4], "ranks": [2, 2], "colour": "blue"}))
    assert run("bench", "--sweep", "tau", "--grid", "0:1:1", "--trials", 1, "--seed", 0, "--config", c,
               "--out", tmp_path / "o.csv") == 1
    c.write_text("{not json")
    assert run("bench", "--sweep", "tau", "--grid", "0:1:1", "--trials", 1, "--seed", 0, "--config", c,
               "--out", tmp_path / "o.csv") == 1
