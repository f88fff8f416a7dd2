import json

import pytest

from dyntomo.cli import main


def write(tmp_path, obj, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return str(p)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_verify(n, capsys):
    assert main(["verify", "--theorem", str(n)]) == 0
    assert main(["verify", "--theorem", str(n), "--json"]) == 0
    out = capsys.readouterr().out
    d = json.loads(out[out.index("{"):])
    assert d["pass"] is True


def test_verify_bad_theorem():
    with pytest.raises(SystemExit) as info:
        main(["verify", "--theorem", "5"])
    assert info.value.code == 2


def test_run_writes_report(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["run", "--config", write(tmp_path, {"preset": 3, "trials": 3}), "--out", str(out)]) == 0
    assert "mean_fidelity=1.000000" in capsys.readouterr().out
    assert json.loads(out.read_text())["ok"]


def test_run_repeated_time_exits_one(tmp_path, capsys):
    c = write(tmp_path, {"model": {"model": "dephasing"}, "initial_ops": "qubit_m1_m2", "times": [1, 1]})
    assert main(["run", "--config", c, "--out", str(tmp_path / "r.json")]) == 1
    assert "distinct time instants" in capsys.readouterr().err


def test_run_config_errors_exit_two(tmp_path, capsys):
    assert main(["run", "--config", write(tmp_path, {"times": [1, 2]}), "--out", str(tmp_path / "r.json")]) == 2
    assert "'model'" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["run", "--config", str(bad)]) == 2
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2


def test_tomo_seed(tmp_path, monkeypatch):
    c = write(tmp_path, {"preset": 2, "shots": 100, "trials": 2})
    outs = []
    for seed in ("1", "1", "2"):
        monkeypatch.setenv("TOMO_SEED", seed)
        p = tmp_path / f"r{len(outs)}.json"
        assert main(["run", "--config", c, "--out", str(p)]) == 0
        outs.append(json.loads(p.read_text())["aggregate"]["mean_fidelity"])
    assert outs[0] == outs[1] != outs[2]
    monkeypatch.setenv("TOMO_SEED", "x")
    assert main(["run", "--config", c, "--out", str(tmp_path / "r.json")]) == 2


def test_sweep_csv_is_reproducible(tmp_path):
    c = write(tmp_path, {"preset": 3, "trials": 3})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--config", c, "--shots", "100,1000", "--out", str(a)]) == 0
    assert main(["sweep", "--config", c, "--shots", "100,1000", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 3
    with pytest.raises(SystemExit):
        main(["sweep", "--config", c, "--shots", "10,-1"])


def test_inspect_builtin(capsys):
    assert main(["inspect", "sic_qutrit"]) == 0
    out = capsys.readouterr().out
    assert "IC: yes" in out and "SIC: yes" in out and "span rank: 9 of 9" in out
    assert main(["inspect", "qubit_m1_m2", "--json"]) == 0
    d = json.loads(capsys.readouterr().out)
    assert d["positive"] and not d["complete"] and not d["ic"] and d["span_rank"] == 2


def test_inspect_file(tmp_path, capsys):
    from dyntomo.measurement import builtin

    p = write(tmp_path, builtin("sic_qubit").to_json(), "ops.json")
    assert main(["inspect", "--file", p, "--json"]) == 0
    assert json.loads(capsys.readouterr().out)["sic"]
    assert main(["inspect", "--file", str(tmp_path / "none.json")]) == 2
