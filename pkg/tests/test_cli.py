import csv
import io
import json

import numpy as np
import pytest

from lpiso.harness import cli


def run(argv, capsys):
    code = cli.main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_normalizers_fractional(tmp_path, capsys):
    out = tmp_path / "norm.csv"
    code, _, err = run(["normalizers", "--kind", "fractional", "--d", "0.25",
                        "--n-grid", "256:65536:dyadic", "--output", str(out)], capsys)
    assert code == 0
    rows = read_csv(out)
    assert len(rows) == 9
    assert 1.45 <= float(rows[0]["beta_hat"]) <= 1.55
    summary = json.loads(err)
    assert summary["status"] == "pass"


def test_unknown_flag(tmp_path, capsys):
    out = tmp_path / "never.csv"
    code, _, err = run(["normalizers", "--bogus", "1", "--output", str(out)], capsys)
    assert code == 1
    assert not out.exists()
    payload = json.loads(err)
    assert payload["category"] == "usage" and payload["message"]


def test_unknown_subcommand(capsys):
    code, _, _ = run(["frobnicate"], capsys)
    assert code == 1


def test_chernoff_boundary_hits(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, _, err = run(["chernoff", "--H", "0.5", "--M", "0.01", "--output", str(out)],
                       capsys)
    assert code == 3
    assert json.loads(err)["category"] == "numerical"


def test_chernoff_ok(tmp_path, capsys):
    out = tmp_path / "c.csv"
    code, _, _ = run(["chernoff", "--H", "0.5", "--reps", "50", "--delta", "0.0078125",
                      "--output", str(out)], capsys)
    assert code == 0
    rows = read_csv(out)
    assert sum(r["record"] == "sample" for r in rows) == 50
    assert sum(r["record"] == "quantile" for r in rows) == 7


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"coeff": {"kind": "fractional", "d": 0.1},
                               "n_grid": "256:4096:dyadic"}))
    out = tmp_path / "a.csv"
    code, _, _ = run(["normalizers", "--config", str(cfg), "--output", str(out)], capsys)
    assert code == 0
    assert float(read_csv(out)[0]["beta_hat"]) == pytest.approx(1.2, abs=0.05)
    code, _, _ = run(["normalizers", "--config", str(cfg), "--d", "0.25",
                      "--output", str(out)], capsys)
    assert float(read_csv(out)[0]["beta_hat"]) == pytest.approx(1.5, abs=0.05)


def test_bad_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text("[1, 2]")
    code, _, _ = run(["normalizers", "--config", str(cfg)], capsys)
    assert code == 1


def test_simulate_deterministic_across_workers(tmp_path, capsys):
    base = ["simulate", "--kind", "fractional", "--d", "0.25", "--innov", "markov",
            "--n", "512", "--reps", "300", "--seed", "5"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert run(base + ["--workers", "1", "--output", str(a)], capsys)[0] == 0
    assert run(base + ["--workers", "3", "--output", str(b)], capsys)[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_output_dir_env(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("LPISO_OUTPUT_DIR", str(tmp_path))
    code, _, _ = run(["cov-limit", "--kind", "fractional", "--d", "0.25",
                      "--output", "cov.csv", "--summary", "cov.json"], capsys)
    assert code == 0
    assert (tmp_path / "cov.csv").exists()
    assert json.loads((tmp_path / "cov.json").read_text())["verdicts"]["covariance"]


def test_failing_verdict_exit_two(capsys):
    code, out, _ = run(["cov-limit", "--kind", "fractional", "--d", "0.25", "--beta", "1.0"],
                       capsys)
    assert code == 2
    assert out.startswith("kind,params,n,s,t,ratio,target,abs_diff")


def test_iso_fit(tmp_path, capsys):
    src = tmp_path / "y.csv"
    src.write_text("y\n3\n1\n2\n0\n5\n")
    out = tmp_path / "mu.csv"
    code, _, err = run(["iso-fit", "--input", str(src), "--t", "0.4,1",
                        "--output", str(out)], capsys)
    assert code == 0
    mu = [float(r["mu_hat"]) for r in read_csv(out)]
    assert mu == [1.5, 1.5, 1.5, 1.5, 5.0]
    assert json.loads(err)["summary"]["phi_hat"] == {"0.4": 1.5, "1.0": 5.0}


def test_iso_fit_two_columns(tmp_path, capsys):
    src = tmp_path / "y.csv"
    src.write_text("1,2\n3,4\n")
    assert run(["iso-fit", "--input", str(src)], capsys)[0] == 1


def test_audit_conditions(capsys):
    code, out, _ = run(["audit-conditions", "--innov", "markov", "--chain-p", "0.9"], capsys)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    proj = [r for r in rows if r["series_id"] == "proj_sum"]
    assert float(proj[0]["cum_sum"]) == pytest.approx(0.6)


def test_ineq_lemma_and_coboundary(capsys):
    code, _, _ = run(["ineq", "--check", "lemma61", "--innov", "markov"], capsys)
    assert code == 0
    code, out, _ = run(["ineq", "--check", "coboundary", "--kind", "alternating_heyde",
                        "--innov", "causal_linear", "--rho", "0.5", "--n-grid", "256,1024"],
                       capsys)
    assert code == 0
    assert out.count("coboundary") == 2


def test_ineq_moment_guard(capsys):
    code, _, _ = run(["ineq", "--check", "moment", "--reps", "100"], capsys)
    assert code == 1


def test_fclt_small(capsys):
    code, _, err = run(["fclt", "--kind", "dirac", "--n", "64", "--reps", "2000",
                        "--meta-runs", "3"], capsys)
    assert code == 0
    assert json.loads(err)["summary"]["meta_runs"] == 3


def test_iso_rate_small(capsys):
    code, out, err = run(["iso-rate", "--theorem", "4.1", "--n-grid", "256,512,1024",
                          "--reps", "2000", "--meta-runs", "2", "--meta-n", "256"], capsys)
    summary = json.loads(err)
    assert abs(summary["summary"]["slope"] + 1 / 3) < 0.1
    assert code in (0, 2)
    assert out.splitlines()[0].startswith("record,n,reps,d_n,kappa")


def test_grid_parser():
    assert cli.parse_n_grid("256:2048:dyadic") == [256, 512, 1024, 2048]
    assert cli.parse_n_grid("3,5") == [3, 5]
    with pytest.raises(Exception):
        cli.parse_n_grid("1:2:linear")
