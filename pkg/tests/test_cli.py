import csv
import json

import pytest

from pbalance.cli import main
from pbalance.gibbs import read_spectrum_csv


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr()


def test_spectrum(tmp_path, capsys):
    code, cap = run(["spectrum", "--model", "pyp", "--sigma", "0.5", "--theta", "1", "--n", "10",
                     "--out", str(tmp_path)], capsys)
    assert code == 0
    with (tmp_path / "spectrum.csv").open() as fh:
        rows = read_spectrum_csv(fh)
    assert len(rows) == 42
    assert "total probability 1" in cap.out
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["artifacts"] == ["spectrum.csv"]


def test_spectrum_guard(tmp_path, capsys):
    code, cap = run(["spectrum", "--model", "crp", "--theta", "1", "--n", "14", "--out", str(tmp_path)], capsys)
    assert code == 2 and "n" in cap.err


def test_bseq(tmp_path, capsys):
    assert run(["bseq", "--model", "esc", "--mu", "ztpois:2", "--s-max", "10", "--out", str(tmp_path)], capsys)[0] == 0
    with (tmp_path / "bseq.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 9 and all(float(r["B_s"]) == 0.0 for r in rows)
    run(["bseq", "--model", "esc", "--mu", "ztbinom:5,0.5", "--out", str(tmp_path)], capsys)
    with (tmp_path / "bseq.csv").open() as fh:
        vals = [r["B_s"] for r in csv.DictReader(fh)]
    assert vals[-1] == "inf" and all(float(v) > 0 for v in vals)


def test_classify(tmp_path, capsys):
    code, cap = run(["classify", "--model", "esc", "--mu", "sbinom:10,0.5", "--brute-force-n", "8",
                     "--out", str(tmp_path)], capsys)
    report = json.loads(cap.out)
    assert code == 0
    assert report["classification"]["kind"] == "seeking" and report["brute_force"]["kind"] == "seeking"
    assert json.loads((tmp_path / "classify.json").read_text()) == report


def test_compare_lc(tmp_path, capsys):
    code, cap = run(["compare-lc", "--model", "pyp", "--sigma", "0.8", "--theta", "1",
                     "--model2", "crp", "--theta2", "1", "--s-max", "50", "--out", str(tmp_path)], capsys)
    assert code == 0 and cap.out.strip().endswith("GREATER")


def test_projectivity(tmp_path, capsys):
    code, cap = run(["projectivity", "--model", "neutral", "--q", "shifted-poisson:3", "--n-max", "8",
                     "--out", str(tmp_path)], capsys)
    assert code == 0 and json.loads(cap.out)["ok"] is True
    code, cap = run(["projectivity", "--model", "esc", "--mu", "ztpois:1", "--n-max", "5",
                     "--out", str(tmp_path)], capsys)
    assert code == 0 and json.loads(cap.out)["ok"] is False


def test_precision_error_exit(tmp_path, capsys):
    code, cap = run(["projectivity", "--model", "esc", "--mu", "ztnegbin:3,0.3", "--en-method", "float",
                     "--n-max", "39", "--out", str(tmp_path)], capsys)
    assert code == 3 and "precision" in cap.err


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"model": "crp", "theta": 2.0, "n": 5}))
    assert run(["spectrum", "--config", str(cfg), "--out", str(tmp_path)], capsys)[0] == 0
    assert len((tmp_path / "spectrum.csv").read_text().splitlines()) == 8
    cfg.write_text(json.dumps({"model": "crp", "bogus": 1}))
    assert run(["spectrum", "--config", str(cfg), "--out", str(tmp_path)], capsys)[0] == 2


def test_er_round_trip(tmp_path, capsys, monkeypatch):
    out = str(tmp_path)
    assert run(["er", "simulate", "--counts", "3,3,2", "--L", "4", "--D", "8", "--seed", "7",
                "--out", out], capsys)[0] == 0
    first = (tmp_path / "dataset.csv").read_bytes()
    run(["er", "simulate", "--counts", "3,3,2", "--L", "4", "--D", "8", "--seed", "7", "--out", out], capsys)
    assert (tmp_path / "dataset.csv").read_bytes() == first

    data = str(tmp_path / "dataset.csv")
    code, cap = run(["er", "fit", "--data", data, "--prior", "ztpois:1", "--iterations", "200",
                     "--burn-in", "100", "--out", out], capsys)
    assert code == 0 and "FNR" in cap.out
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["chains"][0]["n_samples"] == 100
    with (tmp_path / "trace_chain0.csv").open() as fh:
        trace = list(csv.DictReader(fh))
    assert len(trace) == 100 and trace[0]["iter"] == "100" and "lam" in trace[0]

    code, cap = run(["er", "eval", "--data", data, "--estimate", str(tmp_path / "estimate_chain0.csv"),
                     "--out", out], capsys)
    report = json.loads(cap.out)
    assert code == 0 and report["fnr"] == summary["chains"][0]["fnr"]


def test_er_gibbs_prior(tmp_path, capsys):
    out = str(tmp_path)
    run(["er", "simulate", "--counts", "2,2", "--L", "3", "--D", "5", "--out", out], capsys)
    code, _ = run(["er", "fit", "--data", str(tmp_path / "dataset.csv"), "--model", "crp", "--theta", "1",
                   "--iterations", "40", "--burn-in", "10", "--chaperones", "--out", out], capsys)
    assert code == 0


@pytest.mark.parametrize("argv", [
    ["er", "fit", "--prior", "ztpois:1"],
    ["er", "fit", "--data", "missing.csv", "--prior", "ztpois:1"],
    ["er", "fit", "--data", "x.csv", "--prior", "nope:1"],
    ["er", "eval", "--data", "x.csv"],
    ["er", "simulate", "--scenario", "9"],
])
def test_er_config_errors(argv, tmp_path, capsys):
    assert run(argv + ["--out", str(tmp_path)], capsys)[0] == 2


def test_iterations_below_burn_in(tmp_path, capsys):
    run(["er", "simulate", "--counts", "2", "--out", str(tmp_path)], capsys)
    code, _ = run(["er", "fit", "--data", str(tmp_path / "dataset.csv"), "--prior", "ztpois:1",
                   "--iterations", "10", "--burn-in", "20", "--out", str(tmp_path)], capsys)
    assert code == 2


def test_eval_without_truth(tmp_path, capsys):
    (tmp_path / "d.csv").write_text("f1,f2\n1,2\n1,2\n")
    (tmp_path / "e.csv").write_text("cluster\n1\n1\n")
    code, _ = run(["er", "eval", "--data", str(tmp_path / "d.csv"), "--estimate", str(tmp_path / "e.csv"),
                   "--out", str(tmp_path)], capsys)
    assert code == 2


def test_seed_env_override(tmp_path, capsys, monkeypatch):
    args = ["er", "simulate", "--counts", "4,4", "--L", "3", "--D", "20", "--seed", "1", "--out", str(tmp_path)]
    run(args, capsys)
    a = (tmp_path / "dataset.csv").read_text()
    monkeypatch.setenv("PB_SEED", "2")
    run(args, capsys)
    b = (tmp_path / "dataset.csv").read_text()
    assert a != b
    assert json.loads((tmp_path / "manifest.json").read_text())["config"]["seed"] == 2
