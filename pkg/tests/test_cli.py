import csv
import io
import json

import pytest

from mdgs.cli import main


def run(argv):
    out = io.StringIO()
    code = main(argv, out)
    return code, out.getvalue()


def test_region_defaults_to_running_example():
    code, text = run(["region", "--json"])
    assert code == 0
    rep = json.loads(text)
    assert rep["psi"] == pytest.approx(5.013888888888886, abs=1e-9)
    assert rep["sum_rate"] == pytest.approx(3.32392906016611, abs=1e-9)
    assert rep["balanced"]["sigma2_T3"] == pytest.approx(0.1109571108829531, abs=1e-9)


def test_params_split_selectors():
    code, text = run(["params", "--vertex", "1"])
    assert code == 0 and json.loads(text)["sigma2_T3"] == "inf"
    code, text = run(["params", "--balanced"])
    rep = json.loads(text)
    assert rep["R1G"] == pytest.approx(rep["R2G"], abs=1e-10)
    code, text = run(["params", "--r1", "1.6615"])
    assert json.loads(text)["R1G"] == pytest.approx(1.6615, abs=1e-10)
    with pytest.raises(SystemExit):
        run(["params"])


def test_simulate_is_byte_identical(tmp_path):
    argv = ["simulate", "--n-samples", "1000000", "--seed", "7", "--vertex", "2",
            "--kind", "successive"]
    a = run(argv)
    b = run(argv)
    assert a == b
    assert json.loads(a[1])["passed"] is True
    path = tmp_path / "r.csv"
    run(argv + ["--csv", str(path)])
    rows = list(csv.DictReader(path.open()))
    assert {r["quantity"] for r in rows} >= {"R1", "R2", "D1", "D3"}


def test_check_exit_codes():
    assert run(["--check", "scalar-analysis", "--mode", "fig8a", "--rate", "6"])[0] == 0
    assert run(["scalar-analysis", "--mode", "fig8b", "--rate", "6", "--check"])[0] == 0
    # a coarse step ratio misses the 3/4 law by more than the tolerance
    assert run(["scalar-analysis", "--mode", "fig8b", "--rate", "3", "--ratio", "2",
                "--check"])[0] == 1
    assert run(["scalar-analysis", "--mode", "fig8b", "--rate", "3", "--ratio", "2"])[0] == 0


def test_errors_exit_2(capsys):
    assert run(["simulate", "--n-samples", "10"])[0] == 2
    assert "at least" in capsys.readouterr().err
    assert run(["region", "--d3", "0.09"])[0] == 0
    assert run(["params", "--r1", "9"])[0] == 2


def test_sweep_csv():
    code, text = run(["--check", "sweep", "--steps", "5"])
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 5
    assert rows[-1]["sigma2_T3"] == "inf"


def test_cells_csv(tmp_path):
    path = tmp_path / "cells.csv"
    code, text = run(["scalar-analysis", "--mode", "fig8a", "--rate", "3",
                      "--cells-csv", str(path)])
    assert code == 0
    assert path.read_text().startswith("owner,index")
    assert json.loads(text)["mdsq_reference_gap_db"] == pytest.approx(2.67, abs=1e-12)
