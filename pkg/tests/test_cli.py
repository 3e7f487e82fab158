import csv
import json

import numpy as np
import pytest

from bdsde import exact_transport, make_grid, sample_path
from bdsde.cli import main


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_paths_command(tmp_path):
    out = tmp_path / "paths.csv"
    assert main(["paths", "--T", "1", "--n", "512", "--seed", "1", "--out", str(out)]) == 0
    rows = _read_csv(out)
    assert rows[0] == ["t", "W", "B_rev"]
    assert len(rows) == 1 + 513
    first = rows[1]
    assert float(first[0]) == 0.0
    assert float(first[1]) == 0.0
    grid = make_grid(1.0, 512)
    walks_b = sample_path(grid, 1).eps
    b_T = grid.sqrt_delta * float(np.sum(walks_b))
    assert float(first[2]) == pytest.approx(b_T, rel=1e-15)
    # last row: B_rev = 0 at T
    assert float(rows[-1][2]) == 0.0
    assert (tmp_path / "paths.csv.meta.json").exists()


def test_solve_matches_exact_oracle(tmp_path, capsys):
    assert main(["solve", "--model", "transport", "--T", "1", "--n", "4",
                 "--seed", "7"]) == 0
    payload = json.loads(capsys.readouterr().out)
    grid = make_grid(1.0, 4)
    path = sample_path(grid, 7)
    exact = exact_transport(grid, path)
    assert payload["y0"] == pytest.approx(exact.y_path[0], abs=1e-13)
    assert payload["scheme"] == "implicit"


def test_solve_tree_csv_schema(tmp_path):
    tree = tmp_path / "tree.csv"
    out = tmp_path / "solve.json"
    assert main(["solve", "--model", "zero", "--T", "1", "--n", "3", "--seed", "0",
                 "--out", str(out), "--tree-csv", str(tree)]) == 0
    rows = _read_csv(tree)
    assert rows[0] == ["level", "node", "W", "y", "z", "scheme"]
    assert len(rows) == 1 + sum(j + 1 for j in range(4))
    assert rows[1][5] == "implicit"


def test_mc_command_and_byte_identical_outputs(tmp_path):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    args = ["mc", "--model", "transport", "--T", "1", "--n", "6",
            "--samples", "64", "--seed", "5"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    rows = _read_csv(out1)
    assert rows[0] == ["n", "samples", "mean", "var", "ci", "l2err"]
    assert len(rows) == 2
    meta = json.loads((tmp_path / "a.csv.meta.json").read_text())
    assert meta["config"]["samples"] == 64
    assert "numpy" in meta["versions"]


def test_convergence_command(tmp_path):
    out = tmp_path / "conv.csv"
    assert main(["convergence", "--model", "sine", "--T", "1",
                 "--n-list", "4,8", "--samples", "50", "--seed", "2",
                 "--out", str(out)]) == 0
    rows = _read_csv(out)
    assert rows[0] == ["n", "err", "ci"]
    assert [r[0] for r in rows[1:]] == ["4", "8"]
    meta = json.loads((out.parent / "conv.csv.meta.json").read_text())
    assert "slope" in meta["config"]


def test_convergence_rejects_bad_n_list(tmp_path):
    rc = main(["convergence", "--model", "sine", "--n-list", "16,8",
               "--samples", "10", "--out", str(tmp_path / "x.csv")])
    assert rc == 2


def test_picard_diagnose_command(tmp_path):
    out = tmp_path / "picard.csv"
    assert main(["picard-diagnose", "--model", "linear", "--T", "1", "--n", "8",
                 "--seed", "3", "--out", str(out)]) == 0
    rows = _read_csv(out)
    assert rows[0] == ["p", "norm_sq", "ratio"]
    assert rows[1][2] == ""  # first ratio undefined
    meta = json.loads((tmp_path / "picard.csv.meta.json").read_text())
    assert "norms_gamma1" in meta["config"]


def test_spde_command(tmp_path):
    out = tmp_path / "surface.csv"
    assert main(["spde", "--T", "1", "--n", "8", "--seed", "4", "--h", "square",
                 "--x-min", "-1", "--x-max", "1", "--x-points", "5",
                 "--out", str(out)]) == 0
    rows = _read_csv(out)
    assert rows[0] == ["x", "u0", "eps_seed"]
    assert len(rows) == 6
    assert rows[1][2] == "4"


def test_oracle_check_command(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(["oracle-check", "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "PASS" in stdout and "FAIL" not in stdout
    report = json.loads(out.read_text())
    assert report["all_pass"] is True
    assert all({"claim", "lhs", "rhs", "pass"} <= set(r) for r in report["checks"])


def test_unknown_model_is_usage_error(tmp_path):
    assert main(["solve", "--model", "nonexistent", "--n", "4"]) == 2


def test_missing_required_option():
    assert main(["solve", "--model", "zero"]) == 2  # no --n anywhere


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("model = zero\nn = 4\nseed = 9\nT = 1.0\n# comment\n")
    out = tmp_path / "mc.csv"
    assert main(["mc", "--config", str(cfg), "--samples", "16",
                 "--n", "8", "--out", str(out)]) == 0
    meta = json.loads((tmp_path / "mc.csv.meta.json").read_text())
    assert meta["config"]["n"] == 8  # flag beats config
    assert meta["config"]["model"] == "zero"
    assert meta["seed"] == 9


def test_numbers_round_trip_17_digits(tmp_path):
    out = tmp_path / "paths.csv"
    assert main(["paths", "--T", "1", "--n", "3", "--seed", "0",
                 "--out", str(out)]) == 0
    rows = _read_csv(out)
    for row in rows[1:]:
        for cell in row:
            value = float(cell)
            assert format(value, ".17g") == cell
