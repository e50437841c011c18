import csv
import io
import json

import pytest

from varjack import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_decompose_parity(capsys):
    code, out, _ = run(capsys, "decompose", "--family", "parity", "--n", "3")
    assert code == 0
    rows = rows_of(out)
    assert [r["Jp"] for r in rows] == ["3", "3", "1"]


def test_verify_rows(capsys):
    code, out, _ = run(capsys, "verify", "--seed", "7", "--instances", "5")
    assert code == 0
    rows = rows_of(out)
    assert {r["instance"] for r in rows} == {str(i) for i in range(5)}
    assert all(r["pass"] == "true" for r in rows)


def test_varsup(capsys):
    code, out, _ = run(capsys, "lcs", "varsup", "--p0", "0.096", "--gamma-half", "0.8263")
    assert code == 0
    assert float(rows_of(out)[0]["constant"]) >= 1.8e-8


def test_varsup_violation_exit_1(capsys):
    code, _, err = run(capsys, "lcs", "varsup", "--p0", "0.3")
    assert code == 1 and "invariant failed" in err


def test_usage_errors():
    with pytest.raises(SystemExit) as exc:
        cli.main(["nonsense"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        cli.main(["hyper", "--bogus-flag"])
    assert exc.value.code == 2


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("VARJACK_SEED", "123")
    code, out, _ = run(capsys, "estimate", "--family", "additive", "--n", "3", "--samples", "100",
                       "--format", "json")
    assert code == 0
    doc = json.loads(out)
    assert doc["manifest"]["seed"] == 123
    assert doc["rows"][0]["seed"] == 123


def test_byte_identical_and_thread_independent(tmp_path):
    outs = []
    for threads in ("1", "3"):
        path = tmp_path / f"b1_{threads}.csv"
        assert cli.main(["lcs", "b1", "--n", "20", "--samples", "5000", "--seed", "4",
                         "--threads", threads, "--out", str(path)]) == 0
        outs.append(path.read_bytes())
        manifest = json.loads((tmp_path / f"b1_{threads}.csv.manifest.json").read_text())
        assert manifest["subcommand"] == "lcs b1" and manifest["seed"] == 4
    assert outs[0] == outs[1]


def test_config_overrides_flags(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"ns": [2, 3], "seed": 9}))
    code, out, _ = run(capsys, "hyper", "--ns", "1", "--seed", "1", "--config", str(cfg))
    assert code == 0
    assert [r["n"] for r in rows_of(out)] == ["2", "3"]


def test_config_instance(tmp_path, capsys):
    cfg = tmp_path / "inst.json"
    cfg.write_text(json.dumps({"space": {"n": 3, "alphabet": 2},
                               "function": {"family": "parity", "values": [-1, 1]}}))
    code, out, _ = run(capsys, "decompose", "--config", str(cfg))
    assert code == 0
    assert [r["B"] for r in rows_of(out)] == ["1", "0", "0"]


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"nonsense": 1}))
    with pytest.raises(SystemExit) as exc:
        cli.main(["hyper", "--config", str(cfg)])
    assert exc.value.code == 2


def test_figure1_csv(capsys):
    code, out, _ = run(capsys, "lcs", "figure1", "--ns", "10,20", "--replicas", "50", "--w1", "10",
                       "--w2", "11")
    assert code == 0
    rows = rows_of(out)
    assert [r["n"] for r in rows] == ["10", "20"]


def test_seventeen_digits(capsys):
    code, out, _ = run(capsys, "hyper", "--ns", "1")
    assert rows_of(out)[0]["R"] == format(1.8451240256511696, ".17g")


def test_gaussian_and_hoeffding(capsys):
    assert run(capsys, "gaussian", "--coeffs", "0,0,1", "--check-gaps")[0] == 0
    assert run(capsys, "hoeffding", "--targets", "1,0,2")[0] == 0


def test_upper_and_omitted(capsys):
    assert run(capsys, "lcs", "upper", "--n", "4")[0] == 0
    code, out, _ = run(capsys, "lcs", "omitted", "--n", "10", "--p", "0.3", "--samples", "500")
    assert code == 0 and rows_of(out)[0]["default_form"] == "quadratic"
