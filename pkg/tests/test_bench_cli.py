import io
import json
import subprocess
import sys
from pathlib import Path

import pytest

from lvlingam import bench
from lvlingam.cli import main

ROOT = Path(__file__).resolve().parents[1]
IV = str(ROOT / "graphs" / "iv.json")


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "lvlingam", *args], capture_output=True, text=True)


def test_certify_iv(capsys):
    assert main(["certify", IV, "--kind", "tce", "--setting", "unknown",
                 "--source", "T", "--target", "Y", "--oracle"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["identifiable"] is False
    assert out["witness"] == {"latent": "L"}
    assert out["oracle_agrees"] is True


def test_certify_matrix(capsys):
    assert main(["certify", IV, "--kind", "matrix", "--setting", "known"]) == 0
    assert json.loads(capsys.readouterr().out)["identifiable"] is True


def test_certify_noncanonical_warns(capsys, caplog):
    proxy = str(ROOT / "graphs" / "proxy.json")
    assert main(["certify", proxy, "--source", "T", "--target", "Y"]) == 0
    assert "not canonical" in caplog.text
    assert json.loads(capsys.readouterr().out)["identifiable"] is True


def test_exit_codes(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run_cli("certify", str(bad), "--source", "0", "--target", "1").returncode == 2
    cyc = tmp_path / "cyc.json"
    cyc.write_text(json.dumps({"p_o": 2, "p_l": 0, "observed": [0, 1], "latent": [],
                               "edges": [[0, 1], [1, 0]]}))
    r = run_cli("certify", str(cyc), "--source", "0", "--target", "1")
    assert r.returncode == 2 and "cycle" in r.stderr
    big = tmp_path / "big.json"
    assert run_cli("generate", "--po", "12", "--pl", "2", "--prob", "0.3", "-o", str(big)).returncode == 0
    r = run_cli("certify", str(big), "--source", "0", "--target", "1", "--oracle")
    assert r.returncode == 3
    assert run_cli("certify", IV, "--source", "Q", "--target", "Y").returncode == 2
    assert run_cli("certify").returncode == 2


def test_generate_simulate_estimate(tmp_path):
    model, data, est = (str(tmp_path / f) for f in ("m.json", "d.csv", "e.json"))
    assert main(["generate", "--po", "4", "--pl", "1", "--prob", "0.5", "--seed", "3", "-o", model]) == 0
    assert main(["simulate", "--model", model, "--n", "2000", "--seed", "1", "-o", data,
                 "--noise", "exponential", "--scale", "0=2"]) == 0
    assert main(["estimate", "--graph", model, "--data", data, "--restarts", "2", "-o", est]) == 0
    rep = json.loads(Path(est).read_text())
    assert set(rep) == {"model", "bprime", "restarts", "chosen"}
    assert len(rep["restarts"]) == 2


def test_simulate_tanh(tmp_path):
    model = ROOT / "graphs" / "g1.json"
    obj = json.loads(model.read_text())
    obj["weights"] = [[u, v, 1.0 if u == 3 and v == 0 else 0.5] for u, v in obj["edges"]]
    path = tmp_path / "g1m.json"
    path.write_text(json.dumps(obj))
    assert main(["simulate", "--model", str(path), "--n", "10", "--tanh-target", "1,2", "-o",
                 str(tmp_path / "t.csv")]) == 0
    assert main(["simulate", "--model", str(path), "--n", "10", "--tanh-target", "1-2"]) == 2


def test_bench_config_errors(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"protocol": "Nope"}))
    assert main(["bench", str(cfg)]) == 2
    cfg.write_text(json.dumps({"protocol": "ErrorVsSamples", "colour": 1}))
    assert main(["bench", str(cfg)]) == 2
    cfg.write_text(json.dumps({"protocol": "ErrorVsSamples", "trials": 0}))
    assert main(["bench", str(cfg)]) == 2
    toml = tmp_path / "c.toml"
    toml.write_text("protocol = [")
    assert main(["bench", str(toml)]) == 2


def test_bench_toml_and_json_agree(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps(
        {"protocol": "IdentifiabilityCurve", "grid": [0.3, 0.7], "trials": 4, "seed": 9}))
    (tmp_path / "c.toml").write_text(
        'protocol = "IdentifiabilityCurve"\ngrid = [0.3, 0.7]\ntrials = 4\nseed = 9\n')
    outs = []
    for name in ("c.json", "c.toml"):
        out = tmp_path / (name + ".csv")
        assert main(["bench", str(tmp_path / name), "--no-timing", "-o", str(out)]) == 0
        outs.append(out.read_text())
    assert outs[0] == outs[1]
    lines = outs[0].splitlines()
    assert lines[0] == ",".join(bench.HEADER)
    assert len(lines) == 1 + 2 * 4 * 4


def test_bench_workers_do_not_change_results():
    bp = bench.BenchProtocol("RandomGraphFrobenius", (500.0,), 2, 1, {"restarts": 1})
    one = [r.row(False) for r in bench.run(bp, 1)]
    two = [r.row(False) for r in bench.run(bp, 2)]
    assert one == two


def test_bench_protocols_produce_metrics():
    small = {
        "ErrorVsSamples": {"restarts": 1},
        "ErrorVsNoiseScale": {"restarts": 1, "n": 500},
        "Misspecification": {"restarts": 1},
        "RuntimeCurve": {},
    }
    for name, params in small.items():
        grid = (50.0,) if name == "RuntimeCurve" else (0.5,) if name == "ErrorVsNoiseScale" else (500.0,)
        recs = list(bench.run(bench.BenchProtocol(name, grid, 1, 0, params)))
        assert recs and all(r.protocol == name for r in recs)


def test_write_streams_rows():
    rec = bench.BenchRecord("P", "n", 10.0, 0, "m", 0.5, 1.25)
    buf = io.StringIO()
    assert bench.write([rec, rec], buf) == 2
    assert buf.getvalue().splitlines()[1] == "P,n,10,0,m,0.5,1.250000"


def test_workers_env(monkeypatch):
    monkeypatch.setenv(bench.WORKERS_ENV, "3")
    assert bench.default_workers() == 3
    monkeypatch.setenv(bench.WORKERS_ENV, "many")
    with pytest.raises(bench.ConfigError):
        bench.default_workers()
