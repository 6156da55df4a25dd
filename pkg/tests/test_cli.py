import json

import pytest

from multivariance.centering import DataError
from multivariance.cli import SEED_ENV, ingest_csv, main
from multivariance.validation import parse_group_spec


@pytest.fixture
def coins_csv(tmp_path):
    path = tmp_path / "coins.csv"
    assert main(["simulate", "--scenario", "coins:2", "--N", "60", "--seed", "3",
                 "--out", str(path)]) == 0
    return path


def _run(capsys, argv):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_ingest_defaults(coins_csv):
    d = ingest_csv(coins_csv)
    assert d.n == 3 and d.N == 60 and d.names == ["X1", "X2", "X3"]


def test_ingest_group_spec(tmp_path):
    p = tmp_path / "g.csv"
    p.write_text("a,b,c\n1,2,3\n4,5,6\n7,8,10\n")
    d = ingest_csv(p, "x:1-2,y:3")
    assert d.dims == [2, 1] and d.names == ["x", "y"]
    assert parse_group_spec("1-2,3", 3) == ([(0, 2), (2, 3)], ["X1", "X2"])
    for bad in ("x:1-2,y:2-3", "x:0-1,y:2-3", "x:1-4", "x:1", "x:a-b"):
        with pytest.raises(DataError):
            ingest_csv(p, bad)


def test_ingest_errors(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b\n1,2\n3,4\n5,6\n7,8\n9,oops\n")
    with pytest.raises(DataError, match=r"row 5, column 2"):
        ingest_csv(p)
    p.write_text("a,b\n1,2\n3\n")
    with pytest.raises(DataError, match="row 2"):
        ingest_csv(p)
    p.write_text("a,b\n1,\n3,4\n")
    with pytest.raises(DataError, match="row 1, column 2"):
        ingest_csv(p)
    p.write_text("a,b\n1,inf\n3,4\n")
    with pytest.raises(DataError, match="not finite"):
        ingest_csv(p)


def test_compute(capsys, coins_csv):
    code, out, _ = _run(capsys, ["compute", str(coins_csv), "--kind", "multi"])
    assert code == 0
    doc = json.loads(out)
    assert doc["statistic"] > 10
    assert {"tool_version", "seed", "psi", "groups"} <= set(doc)
    for kind in ("total", "m2", "m3", "m:3", "total_m:3", "lambda:0.5", "mcor", "mcor2", "totmcor"):
        assert main(["compute", str(coins_csv), "--kind", kind]) == 0
    capsys.readouterr()
    assert main(["compute", str(coins_csv), "--kind", "m:7"]) == 1
    assert main(["compute", str(coins_csv), "--kind", "nope"]) == 1
    assert main(["compute", str(coins_csv), "--psi", "euclid:1,log,expbnd:1:0.5"]) == 0
    assert main(["compute", str(coins_csv), "--psi", "euclid:1,log"]) == 1
    assert main(["compute", str(coins_csv), "--psi", "euclid:3"]) == 1


def test_test_command(capsys, coins_csv):
    code, out, _ = _run(capsys, ["test", str(coins_csv), "--kind", "total", "--method",
                                 "conservative", "--alpha", "0.05"])
    assert code == 0 and json.loads(out)["result"]["reject"] is True
    code, _, err = _run(capsys, ["test", str(coins_csv), "--kind", "total", "--method",
                                 "conservative", "--alpha", "0.3"])
    assert code == 1 and "0.215" in err
    code, out, _ = _run(capsys, ["test", str(coins_csv), "--kind", "comb", "--L", "50"])
    assert code == 0 and len(json.loads(out)["result"]["outcomes"]) == 2
    code, out, _ = _run(capsys, ["test", str(coins_csv), "--method", "consistent"])
    assert code == 0 and json.loads(out)["result"]["rejection_level"] == pytest.approx(60 ** 0.5 * 2)


def test_determinism_and_env_seed(capsys, coins_csv, monkeypatch):
    argv = ["test", str(coins_csv), "--kind", "m2", "--L", "40", "--seed", "7"]
    _, a, _ = _run(capsys, argv)
    _, b, _ = _run(capsys, argv)
    assert a == b
    monkeypatch.setenv(SEED_ENV, "7")
    _, c, _ = _run(capsys, argv[:-2])
    assert c == a
    monkeypatch.setenv(SEED_ENV, "x")
    assert main(argv[:-2]) == 1


def test_structure_command(capsys, coins_csv, tmp_path):
    dot = tmp_path / "g.dot"
    assert main(["structure", str(coins_csv), "--out", str(dot)]) == 0
    assert dot.read_text().startswith("graph")
    js = tmp_path / "g.json"
    assert main(["structure", str(coins_csv), "--mode", "clustered", "--decision", "resampling",
                 "--L", "50", "--out", str(js)]) == 0
    doc = json.loads(js.read_text())
    assert doc["schema_version"] == 1 and doc["metadata"]["tool_version"]
    assert {"seed", "psi", "groups"} <= set(doc["metadata"])
    assert main(["structure", str(coins_csv), "--decision", "conservative", "--alpha", "0.5"]) == 1


def test_simulate_and_power(capsys, tmp_path):
    code, out, _ = _run(capsys, ["simulate", "--scenario", "mvnormal:const(0.1):4:2/2",
                                 "--N", "5", "--seed", "1"])
    assert code == 0 and out.splitlines()[0] == "X1_1,X1_2,X2_1,X2_2"
    code, out, _ = _run(capsys, ["power", "--scenario", "coins:2", "--test", "multi,m2",
                                 "--method", "resampling", "--L", "30", "--runs", "10",
                                 "--Ns", "10,20"])
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0].startswith("scenario,N,kind,method") and len(lines) == 5
    assert main(["simulate", "--scenario", "nope", "--N", "5"]) == 1
    assert main(["power", "--scenario", "coins:2", "--Ns", "1"]) == 1
    assert main(["power", "--scenario", "coins:2", "--test", "m:5", "--runs", "2"]) == 1


def test_usage_and_data_errors(capsys, tmp_path):
    assert main(["frobnicate"]) == 1
    assert main(["compute"]) == 1
    assert main(["compute", str(tmp_path / "missing.csv")]) == 2
    p = tmp_path / "one.csv"
    p.write_text("a\n1\n2\n")
    assert main(["compute", str(p)]) == 1
    p.write_text("a,b\n1,2\n")
    assert main(["compute", str(p)]) == 2
    capsys.readouterr()
    assert main(["--version"]) == 0
    assert "0.1.0" in capsys.readouterr().out
