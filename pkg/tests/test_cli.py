import csv
import json

import pytest

from permitsim import cli
from permitsim.market import SolverError

SMALL = {
    "policy": {"horizon": 3, "penalty": 10, "price_support": 4,
               "allocation": {"schedule": [[9, 9, 9], [12, 12, 12]]}},
    "economy": {"q": 0.5, "r": 0.01, "rho": 0.03},
    "firms": {"bounds": {"hi": {"q0": 100, "u_old": 1.15, "d_old": 1.07, "u_new": 1.10, "d_new": 1.04,
                                "cost_new": 100, "s_up": 10, "s_down": 5},
                         "lo": {"q0": 100, "u_old": 1.13, "d_old": 1.05, "u_new": 1.08, "d_new": 1.02,
                                "cost_new": 80, "s_up": 10, "s_down": 5}},
              "count": 2},
}


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "small.json"
    path.write_text(json.dumps(SMALL))
    return path


def _market(tmp_path, capsys, text, *flags):
    pos = tmp_path / "pos.txt"
    pos.write_text(text)
    code = cli.main(["market", str(pos), *flags])
    return code, capsys.readouterr()


def test_market_single_seller(tmp_path, capsys):
    code, out = _market(tmp_path, capsys, "# id,position,tech\ns,-1,old\nb,1,old\n")
    report = json.loads(out.out)
    assert code == 0 and report["status"] == "equilibrium"
    assert report["price"] == pytest.approx(6.93485, abs=1e-5)


def test_market_with_support(tmp_path, capsys):
    code, out = _market(tmp_path, capsys, "s,-1,new\nb,1,old\n", "--price-support", "5")
    report = json.loads(out.out)
    assert report["price"] == pytest.approx(8.41, abs=1e-2)
    assert report["price"] >= 5
    assert report["firms"][0]["cashed"] == pytest.approx(1 - report["firms"][0]["submitted"])


def test_market_without_sellers(tmp_path, capsys):
    code, out = _market(tmp_path, capsys, "a,1\nb,2,old\n")
    report = json.loads(out.out)
    assert report["status"] == "no supply"
    assert [f["uncovered"] for f in report["firms"]] == [1.0, 2.0]
    assert [f["payoff"] for f in report["firms"]] == [-10.0, -20.0]


def test_market_parse_error_names_line(tmp_path, capsys):
    code, out = _market(tmp_path, capsys, "a,1,old\n\nb,abc,old\n")
    assert code == cli.EXIT_CONFIG
    assert "line 3" in out.err


def test_market_output_is_sorted_json(tmp_path, capsys):
    _, out = _market(tmp_path, capsys, "s,-1,old\nb,1,old\n")
    report = json.loads(out.out)
    assert out.out.strip() == json.dumps(report, indent=2, sort_keys=True)


def test_adopt_writes_side_by_side_files(config, tmp_path, capsys):
    out = tmp_path / "adopt"
    assert cli.main(["adopt", "--config", str(config), "--out", str(out)]) == 0
    for name in ("trajectory_pg0.csv", "trajectory_pg4.csv", "adoption_times.csv", "adopters.csv",
                 "expected_prices.csv", "manifest.json"):
        assert (out / name).exists()
    rows = list(csv.DictReader(open(out / "adopters.csv")))
    assert list(rows[0]) == ["period", "pg_0", "pg_4"]
    assert len(rows) == 3
    manifest = json.loads((out / "manifest.json").read_text())
    assert "adopters.csv" in manifest["outputs"] and manifest["command"] == "adopt"


def test_adopt_sweep(config, tmp_path):
    out = tmp_path / "sweep"
    assert cli.main(["adopt", "--config", str(config), "--pg-sweep", "1.5,2.5,3.5", "--out", str(out)]) == 0
    header = (out / "adopters.csv").read_text().splitlines()[0]
    assert header == "period,pg_1.5,pg_2.5,pg_3.5"


def test_adopt_one_firm_one_period(tmp_path):
    doc = dict(SMALL)
    doc["policy"] = {"horizon": 1, "penalty": 10, "price_support": 0, "allocation": {"alpha": 0, "beta": 5}}
    doc["firms"] = {"explicit": [SMALL["firms"]["bounds"]["hi"]]}
    path = tmp_path / "one.json"
    path.write_text(json.dumps(doc))
    out = tmp_path / "one"
    assert cli.main(["adopt", "--config", str(path), "--out", str(out)]) == 0
    lines = (out / "trajectory_pg0.csv").read_text().splitlines()
    assert len(lines) == 2


def test_montecarlo_is_byte_identical(config, tmp_path):
    runs = []
    for k in range(2):
        out = tmp_path / f"mc{k}"
        assert cli.main(["montecarlo", "--config", str(config), "--paths", "200", "--seed", "42",
                         "--out", str(out)]) == 0
        runs.append(out)
    files = sorted(p.name for p in runs[0].iterdir() if p.name != "manifest.json")
    assert files == ["cdf_pg4.csv", "nets_pg4.csv", "pdf_pg4.csv", "risk_pg4.json", "summary_pg4.json"]
    for name in files:
        assert (runs[0] / name).read_bytes() == (runs[1] / name).read_bytes()


def test_montecarlo_without_support_has_no_outlay(config, tmp_path):
    out = tmp_path / "mc"
    assert cli.main(["montecarlo", "--config", str(config), "--paths", "50", "--pg-sweep", "0",
                     "--out", str(out)]) == 0
    rows = list(csv.DictReader(open(out / "nets_pg0.csv")))
    assert all(float(r["x_out"]) == 0.0 for r in rows)
    risk = json.loads((out / "risk_pg0.json").read_text())
    assert set(risk) == {"0.01", "0.05", "0.10"}


def test_invalid_config_exit_code(tmp_path):
    doc = json.loads(json.dumps(SMALL))
    doc["policy"]["price_support"] = 10
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    assert cli.main(["adopt", "--config", str(path), "--out", str(tmp_path / "x")]) == cli.EXIT_CONFIG


def test_budget_exit_code(tmp_path):
    doc = dict(SMALL, options={"scenario_budget": 3})
    path = tmp_path / "budget.json"
    path.write_text(json.dumps(doc))
    assert cli.main(["adopt", "--config", str(path), "--out", str(tmp_path / "x")]) == cli.EXIT_BUDGET


def test_solver_failure_exit_code(config, tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise SolverError("forced")

    monkeypatch.setattr("permitsim.adoption.clear_market", broken)
    assert cli.main(["adopt", "--config", str(config), "--out", str(tmp_path / "x")]) == cli.EXIT_SOLVER
