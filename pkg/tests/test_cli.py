import csv
import json
import math

import pytest

from maxrank import cli, gallery
from maxrank.suite import RunConfig, exit_status, run


def test_list(capsys):
    assert cli.main(["list"]) == 0
    out = capsys.readouterr().out
    assert "hyperboloid422" in out
    assert cli.main(["list", "--json"]) == 0
    data = json.loads(capsys.readouterr().out)
    assert len(data) >= 4 and {"id", "description", "expected"} <= set(data[0])


def test_verify_hyperboloid_ri2(tmp_path, capsys):
    code = cli.main(["verify", "--case", "hyperboloid422", "--check", "ri2", "--epsilon", "3", "--seed", "7",
                     "--out", str(tmp_path)])
    assert code == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert rep["results"][0]["verdict"] == "ViolatedRI2"
    rows = list(csv.DictReader(open(tmp_path / "witnesses.csv")))
    r = gallery.hyperboloid_r_epsilon(gallery.hyperboloid_ri2_radius(3.0))
    q = [float(v) for v in rows[0]["q"].split()]
    assert q == pytest.approx([math.pi / 2, r])


def test_verify_cylinder_search(tmp_path):
    code = cli.main(["verify", "--case", "cylinder424", "--check", "ri1-search", "--A", "2", "--C", "5",
                     "--seed", "7", "--out", str(tmp_path)])
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "witnesses.csv")))
    y = float(rows[0]["q"].split()[1])
    assert y == pytest.approx(gallery.cylinder_ri1_witness(2, 5) + 1)
    assert y == pytest.approx(3.37, abs=0.02)


def test_verify_product_all_pass(tmp_path):
    assert cli.main(["verify", "--case", "product-s1-s1", "--seed", "7", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "report.json").read_text())
    assert all(r["matched"] for r in rep["results"])
    assert len(rep["results"]) == len(gallery.get_case("product-s1-s1").checks)


def test_unexpected_verdict_exit_2(tmp_path):
    # a tiny epsilon makes torus fiber inclusion fail fullness, which is not what the table expects
    code = cli.main(["verify", "--case", "product-s1-s1", "--check", "ri2", "--epsilon", "0.5", "--seed", "1",
                     "--out", str(tmp_path)])
    assert code == 2


def test_indeterminate_exit_3(monkeypatch, tmp_path):
    from maxrank import suite
    from maxrank.reports import Report, Verdict

    monkeypatch.setitem(suite.RUNNERS, "S2", lambda case, cfg: Report("S2", Verdict.INDETERMINATE, case.id))
    assert cli.main(["verify", "--case", "plane425", "--check", "S2", "--seed", "1", "--out", str(tmp_path)]) == 3


@pytest.mark.parametrize(
    "argv",
    [
        ["verify", "--case", "plane425"],
        ["verify", "--case", "nope", "--seed", "1"],
        ["verify", "--case", "plane425", "--seed", "1", "--samples", "3"],
        ["verify", "--case", "plane425", "--seed", "1", "--box", "2:1,0:1"],
        ["verify", "--case", "plane425", "--seed", "1", "--check", "bogus"],
        ["sweep", "foo", "--seed", "1"],
    ],
)
def test_config_errors_exit_1(argv, tmp_path, capsys):
    assert cli.main(argv + ["--out", str(tmp_path)]) == 1


def test_sweeps(tmp_path):
    assert cli.main(["sweep", "r", "--seed", "1", "--start", "0", "--stop", "3", "--num", "13", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep_r.csv")))
    assert len(rows) == 13
    for r in rows:
        assert float(r["lhs"]) == pytest.approx(math.sqrt(float(r["parameter"]) ** 2 + 1), abs=1e-9)
    assert cli.main(["sweep", "epsilon", "--seed", "1", "--values", "1,3,4,5,6", "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "sweep_epsilon.csv")))
    assert all(float(r["margin"]) > 0 for r in rows)
    assert cli.main(["sweep", "y", "--seed", "1", "--start", "0", "--stop", "5", "--num", "21", "--out", str(tmp_path)]) == 0
    g = [float(r["margin"]) for r in csv.DictReader(open(tmp_path / "sweep_y.csv"))]
    assert g[0] < 0 < g[-1]
    assert cli.main(["sweep", "A", "--case", "plane425", "--seed", "1", "--values", "1,2,3", "--C", "1",
                     "--out", str(tmp_path)]) == 0


def test_deterministic_reports(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for d in (a, b):
        assert cli.main(["verify", "--case", "cylinder424", "--seed", "7", "--out", str(d)]) == 0
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "witnesses.csv").read_bytes() == (b / "witnesses.csv").read_bytes()


def test_suite_api():
    res = run(RunConfig(seed=3, cases=("plane425",), checks=("S2", "ri1-search")))
    assert exit_status(res) == 0
    with pytest.raises(ValueError):
        RunConfig(seed=None)
