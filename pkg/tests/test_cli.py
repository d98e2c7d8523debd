import csv
import json

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from fodgmm.cli import main
from fodgmm.config import parse_config
from fodgmm.estimators import estimate
from fodgmm.exceptions import ConfigError, DegenerateDataWarning, PanelFormatError
from fodgmm.experiment import COMPARISON_COLUMNS, SUMMARY_COLUMNS
from fodgmm.panel import PanelData
from fodgmm.panel_io import read_panel_csv, write_panel_csv
from fodgmm.simulation import DesignPoint, EstimatorSpec, generate_panel, replication_seed

SMALL = """\
# small grid
T = 5
N = 100
sigma_eta = 1, 4
estimators = FD, FOD, FD:1
replications = 4
master_seed = 17
"""


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


# -- config -----------------------------------------------------------------

def test_parse_config_lists_and_defaults():
    cfg = parse_config(SMALL + "rho = 0.3, 0.8\nerror_model = time-series-hetero\n")
    assert cfg.T == [5] and cfg.sigma_eta == [1.0, 4.0] and cfg.rho == [0.3, 0.8]
    assert cfg.estimators == [EstimatorSpec("fd"), EstimatorSpec("fod"), EstimatorSpec("fd", step=1)]
    designs = list(cfg.designs())
    assert len(designs) == 4
    assert [(d.sigma_eta, d.rho) for d in designs] == [(1, 0.3), (1, 0.8), (4, 0.3), (4, 0.8)]
    assert all(d.N == 100 and d.replications == 4 and d.master_seed == 17 for d in designs)


@pytest.mark.parametrize(
    "text, line",
    [
        ("T = 10\nT = 12\n", 2),
        ("T = 10\n\nbogus = 1\n", 3),
        ("T = ten\n", 1),
        ("replications\n", 1),
        ("# c\nestimators = FD, GLS\n", 2),
        ("error_model = normal\n", 1),
        ("replications = 0\n", 1),
        ("master_seed = -4\n", 1),
    ],
)
def test_parse_config_errors_carry_line(text, line):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.lineno == line
    assert str(info.value).startswith(f"line {line}:")


def test_bad_config_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.cfg"
    path.write_text("T = 10\nrho = abc\n")
    assert main(["run-experiment", str(path)]) == 1
    assert "line 2" in capsys.readouterr().err
    assert main(["run-experiment", str(tmp_path / "missing.cfg")]) == 1


# -- run-experiment ---------------------------------------------------------

def test_run_experiment_writes_tables(tmp_path):
    cfg = tmp_path / "grid.cfg"
    cfg.write_text(SMALL)
    out = tmp_path / "out"
    assert main(["run-experiment", str(cfg), "--out", str(out)]) == 0
    summary = read_rows(out / "summary.csv")
    comparison = read_rows(out / "comparison.csv")
    assert summary[0] == SUMMARY_COLUMNS
    assert comparison[0] == COMPARISON_COLUMNS
    # 2 cells x 3 estimators x 2 coefficients; one FD/FOD pair per step present
    assert len(summary) == 1 + 12
    assert len(comparison) == 1 + 4
    first = dict(zip(SUMMARY_COLUMNS, summary[1]))
    assert (first["T"], first["sigma_eta"], first["estimator"], first["coef"]) == ("5", "1", "FD:2", "delta")
    assert first["failures"] == "0"
    assert comparison[1][5:8] == ["FD:2", "FOD:2", "delta"]
    raw = (out / "summary.csv").read_bytes()
    assert b"\r\n" not in raw


def test_run_experiment_is_byte_identical(tmp_path):
    cfg = tmp_path / "grid.cfg"
    cfg.write_text(SMALL)
    outputs = []
    for threads in ("1", "8", "1"):
        out = tmp_path / f"out{len(outputs)}"
        assert main(["run-experiment", str(cfg), "--out", str(out), "--threads", threads]) == 0
        outputs.append(((out / "summary.csv").read_bytes(), (out / "comparison.csv").read_bytes()))
    assert outputs[0] == outputs[1] == outputs[2]


def test_run_experiment_overrides(tmp_path):
    cfg = tmp_path / "grid.cfg"
    cfg.write_text(SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run-experiment", str(cfg), "--out", str(a)])
    main(["run-experiment", str(cfg), "--out", str(b), "--seed", "18", "--reps", "3"])
    assert (a / "summary.csv").read_bytes() != (b / "summary.csv").read_bytes()


def test_run_experiment_singular_cells(tmp_path, capsys):
    cfg = tmp_path / "sys.cfg"
    cfg.write_text("T = 5, 30\nN = 40\nestimators = FD-SYS, FOD-SYS\nreplications = 2\n")
    out = tmp_path / "out"
    assert main(["run-experiment", str(cfg), "--out", str(out)]) == 2
    assert "1 grid cell" in capsys.readouterr().err
    rows = [dict(zip(SUMMARY_COLUMNS, r)) for r in read_rows(out / "summary.csv")[1:]]
    ok = [r for r in rows if r["T"] == "5"]
    bad = [r for r in rows if r["T"] == "30"]
    assert all(r["failures"] == "0" and r["bias"] for r in ok)
    assert len(bad) == 4
    assert all(r["failures"] == "2:singular-weighting" and r["bias"] == "" for r in bad)
    # the partial outputs still carry the healthy cell's comparison
    comparison = read_rows(out / "comparison.csv")[1:]
    assert comparison[0][0] == "5" and comparison[0][8] != ""
    assert comparison[-1][0] == "30" and comparison[-1][8:] == ["", "", ""]


# -- panel CSV --------------------------------------------------------------

def test_panel_csv_round_trip(tmp_path):
    panel = generate_panel(DesignPoint(N=30, T=4), replication_seed(0, 0))
    path = tmp_path / "p.csv"
    write_panel_csv(panel, path)
    back, ids, names = read_panel_csv(path, return_ids=True)
    assert_array_equal(back.y, panel.y)
    assert_array_equal(back.x, panel.x)
    assert ids[:2] == ["0", "1"] and names == ["x1"]
    assert path.read_text().splitlines()[0] == "id,t,y,x1"


def test_panel_csv_multiple_regressors_and_order(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("id,t,y,x1,x2\nb,1,2,3,4\na,0,1,1,1\nb,0,5,6,7\na,1,2,2,2\na,2,0,0,0\nb,2,0,0,0\n")
    panel, ids, names = read_panel_csv(path, return_ids=True)
    assert ids == ["b", "a"] and names == ["x1", "x2"]
    assert_array_equal(panel.y, [[5, 2, 0], [1, 2, 0]])
    assert_array_equal(panel.x[0], [[6, 7], [3, 4], [0, 0]])


@pytest.mark.parametrize(
    "body, needle",
    [
        ("1,0,1,1\n1,2,1,1\n", "id '1' is missing period 1"),
        ("1,0,1,1\n1,1,x,1\n", "row 3, column 'y'"),
        ("1,0,1,1\n1,1,1,1\n2,0,1,1\n", "id '2'"),
        ("1,0,1,1\n1,0,1,1\n", "more than once"),
        ("1,0,1\n", "row 2"),
        ("1,0.5,1,1\n", "column 't'"),
        ("1,0,nan,1\n", "non-finite"),
    ],
)
def test_panel_csv_errors(tmp_path, body, needle):
    path = tmp_path / "p.csv"
    path.write_text("id,t,y,x1\n" + body)
    with pytest.raises(PanelFormatError, match=needle):
        read_panel_csv(path)


def test_panel_csv_bad_header(tmp_path):
    path = tmp_path / "p.csv"
    path.write_text("t,id,y,x1\n0,1,1,1\n")
    with pytest.raises(PanelFormatError, match="header"):
        read_panel_csv(path)
    path.write_text("")
    with pytest.raises(PanelFormatError, match="empty"):
        read_panel_csv(path)


# -- estimate ---------------------------------------------------------------

@pytest.fixture
def panel_csv(tmp_path):
    panel = generate_panel(DesignPoint(N=200, T=6), replication_seed(3, 0))
    path = tmp_path / "panel.csv"
    write_panel_csv(panel, path)
    return panel, path


def test_estimate_matches_library_bit_for_bit(panel_csv, tmp_path, capsys):
    panel, path = panel_csv
    record = tmp_path / "est.json"
    assert main(["estimate", str(path), "--json", str(record)]) == 0
    printed = capsys.readouterr().out
    assert "moments: 23" in printed and "delta" in printed
    direct = estimate(panel, "fod", "recent-lags", 2)
    saved = json.loads(record.read_text())
    assert np.array(saved["beta"]).tobytes() == direct.beta.tobytes()
    assert saved["transform_kind"] == "FOD" and saved["moments"] == direct.moments


@pytest.mark.parametrize("flags", [["--transform", "fd"], ["--system"], ["--step", "1", "--scheme", "all-lags"]])
def test_estimate_flags(panel_csv, tmp_path, flags):
    panel, path = panel_csv
    record = tmp_path / "est.json"
    assert main(["estimate", str(path), "--json", str(record)] + flags) == 0
    transform = "fd" if "fd" in flags else "fod"
    step = 1 if "1" in flags else 2
    scheme = "all-lags" if "all-lags" in flags else "recent-lags"
    direct = estimate(panel, transform, scheme, step, "--system" in flags)
    assert np.array(json.loads(record.read_text())["beta"]).tobytes() == direct.beta.tobytes()


def test_estimate_single_individual_exits_2(tmp_path, capsys):
    panel = generate_panel(DesignPoint(N=1, T=6), replication_seed(0, 0))
    path = tmp_path / "one.csv"
    write_panel_csv(panel, path)
    assert main(["estimate", str(path)]) == 2
    assert "estimation failed" in capsys.readouterr().err


def test_estimate_bad_csv_exits_1(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("id,t,y,x1\n1,0,1,1\n1,1,oops,1\n")
    assert main(["estimate", str(path)]) == 1
    assert "row 3, column 'y'" in capsys.readouterr().err
    assert main(["estimate", str(tmp_path / "none.csv")]) == 1


def test_estimate_unbalanced_names_id(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("id,t,y,x1\nA,0,1,1\nA,1,1,2\nA,2,2,1\nB,0,1,1\nB,1,3,1\n")
    assert main(["estimate", str(path)]) == 1
    assert "'B'" in capsys.readouterr().err


# -- check-equivalence ------------------------------------------------------

def test_check_equivalence_nested(capsys):
    assert main(["check-equivalence", "--T", "6"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("NESTED")
    diff = float(out.split("max rel diff:")[1])
    assert diff < 1e-8


def test_check_equivalence_not_nested(capsys):
    assert main(["check-equivalence", "--T", "10", "--scheme", "recent-lags"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("NOT NESTED") and "s=1, t=3" in out
    assert float(out.split("max rel diff:")[1]) > 1e-6


def test_check_equivalence_two_periods_and_system(capsys):
    assert main(["check-equivalence", "--T", "2", "--scheme", "recent-lags"]) == 0
    assert capsys.readouterr().out.startswith("NESTED")
    assert main(["check-equivalence", "--T", "4", "--system"]) == 0
    assert float(capsys.readouterr().out.split("max rel diff:")[1]) < 1e-8


def test_check_equivalence_from_csv(panel_csv, capsys):
    _, path = panel_csv
    assert main(["check-equivalence", str(path)]) == 0
    assert capsys.readouterr().out.startswith("NESTED")


def test_check_equivalence_estimation_failure(tmp_path, capsys):
    y = np.zeros((50, 5))
    x = np.random.default_rng(0).standard_normal((50, 5))
    path = tmp_path / "flat.csv"
    write_panel_csv(PanelData(y, x), path)
    with pytest.warns(DegenerateDataWarning):
        assert main(["check-equivalence", str(path)]) == 2


def test_simulate_writes_generate_panel(tmp_path):
    path = tmp_path / "sim.csv"
    assert main(["simulate", str(path), "--T", "4", "--N", "20", "--seed", "5", "--rep", "2"]) == 0
    expected = generate_panel(DesignPoint(N=20, T=4, master_seed=5), replication_seed(5, 2))
    assert_array_equal(read_panel_csv(path).y, expected.y)


def test_usage_errors_exit_1(capsys):
    assert main(["estimate", "x.csv", "--scheme", "every-lag"]) == 1
    assert main(["estimate"]) == 1
    assert main(["--help"]) == 0
    assert "run-experiment" in capsys.readouterr().out


def test_panel_does_not_freeze_caller_arrays():
    y = np.zeros((3, 4))
    x = np.ones((3, 4))
    PanelData(y, x)
    y[0, 0] = 1.0
    x[0, 0] = 2.0
