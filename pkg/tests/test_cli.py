import json
import subprocess
import sys

import numpy as np
import pytest

from mollikit.grid import Domain, ScalarField, read_field_csv, write_field_csv

DOMAIN_65 = '{"kind": "box", "bbox": [[0.0, 1.0]], "resolution": [65]}'
DOMAIN_257 = '{"kind": "box", "bbox": [[0.0, 1.0]], "resolution": [257]}'


def run_cli(*args):
    return subprocess.run([sys.executable, "-m", "mollikit.cli", *args],
                          capture_output=True, text=True)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli")
    dom = Domain.box([(0.0, 1.0)], 257)
    x = dom.axis_coords(0)
    write_field_csv(ScalarField(dom, np.sin(np.pi * x)), path / "f.csv")
    write_field_csv(ScalarField(dom, np.minimum(x, 1 - x)), path / "alpha.csv")
    write_field_csv(ScalarField(dom, 0.9 * np.minimum(x, 1 - x)), path / "f09.csv")
    return path


def test_eta_subcommand(workdir):
    out = workdir / "eta.csv"
    rep = workdir / "eta.json"
    res = run_cli("eta", "--builder", "quadratic", "--epsilon", "0.1",
                  "--domain", DOMAIN_257, "--out", str(out), "--report", str(rep),
                  "--no-timestamp")
    assert res.returncode == 0, res.stderr
    report = json.loads(rep.read_text())
    assert report["builder"] == "quadratic"
    assert report["kappa"] == pytest.approx((0.9 / 1.1) ** 2)
    assert report["violations"] == []
    field = read_field_csv(out)
    assert field.values.max() <= 0.25


def test_mollify_subcommand(workdir):
    out = workdir / "tf.csv"
    rep = workdir / "tf.json"
    res = run_cli("mollify", "--input", str(workdir / "f.csv"),
                  "--eta", '{"builder": "quadratic", "epsilon": 0.1}',
                  "--domain", DOMAIN_257, "--n", "4",
                  "--out", str(out), "--grad", str(workdir / "tf_grad.csv"),
                  "--report", str(rep), "--no-timestamp")
    assert res.returncode == 0, res.stderr
    report = json.loads(rep.read_text())
    assert report["sup_ratio"] <= 1.0
    assert "runtime_ms" not in report
    tf = read_field_csv(out)
    assert abs(tf.values).max() <= 1.0
    grad = read_field_csv(workdir / "tf_grad.csv")
    assert abs(grad.values).max() <= np.pi * 1.01


def test_mollify_missing_input_is_config_error(workdir):
    res = run_cli("mollify", "--input", str(workdir / "nope.csv"),
                  "--eta", '{"builder": "quadratic", "epsilon": 0.1}',
                  "--domain", DOMAIN_257, "--n", "2",
                  "--out", str(workdir / "x.csv"))
    assert res.returncode == 2
    assert "config_error" in res.stderr


def test_study_subcommand(workdir):
    out = workdir / "study.json"
    res = run_cli("study", "--fixture", "sin", "--domain", DOMAIN_257,
                  "--kernel", '{"profile": "bump", "order": 32}',
                  "--n", "1,2,4,8", "--norms", "L1,L2,W12",
                  "--out", str(out), "--no-timestamp")
    assert res.returncode == 0, res.stderr
    report = json.loads(out.read_text())
    assert report["n_values"] == [1, 2, 4, 8]
    assert len(report["errors"]["L2"]) == 4
    assert all(c["pass"] for c in report["bound_checks"])
    csv_path = workdir / "study.csv"
    lines = csv_path.read_text().strip().splitlines()
    assert len(lines) == 5  # header + one row per n


def test_study_failure_exits_one(workdir):
    # gradients of a jump do not converge: the W12 decay check must fail
    dom = Domain.box([(0.0, 1.0)], 257)
    x = dom.axis_coords(0)
    write_field_csv(ScalarField(dom, (x > 0.5).astype(float)),
                    workdir / "jump.csv")
    res = run_cli("study", "--fixture", f"custom:{workdir / 'jump.csv'}",
                  "--domain", DOMAIN_257, "--kernel",
                  '{"profile": "bump", "order": 32}',
                  "--n", "1,2,4", "--norms", "W12",
                  "--out", str(workdir / "jump.json"), "--no-timestamp")
    assert res.returncode == 1
    assert "failed_invariant" in res.stdout


def test_norm1_subcommand(workdir):
    out = workdir / "norm1.json"
    res = run_cli("norm1", "--domain", DOMAIN_257,
                  "--kernel", '{"profile": "bump", "order": 32}',
                  "--probes", "40", "--out", str(out), "--no-timestamp")
    assert res.returncode == 0, res.stderr
    report = json.loads(out.read_text())
    assert report["estimate"] <= report["bound"] * 1.1


def test_counterexample_subcommand(workdir):
    out = workdir / "ce.json"
    res = run_cli("counterexample", "--resolutions", "1025",
                  "--out", str(out), "--no-timestamp")
    assert res.returncode == 0, res.stderr
    report = json.loads(out.read_text())
    assert 0.8 <= report["slope_vs_model"] <= 1.2
    assert report["slope_vs_loglog"] == pytest.approx(0.5, abs=0.02)


def test_feasible_subcommand(workdir):
    out = workdir / "feas.json"
    itdir = workdir / "iterates"
    res = run_cli("feasible", "--f", str(workdir / "f09.csv"),
                  "--alpha", str(workdir / "alpha.csv"),
                  "--mode", "value", "--domain", DOMAIN_257,
                  "--kernel", '{"profile": "bump", "order": 32}',
                  "--n", "1,2,4,8", "--out", str(out),
                  "--emit-iterates", str(itdir), "--no-timestamp")
    assert res.returncode == 0, res.stderr
    report = json.loads(out.read_text())
    assert all(c["pass"] for c in report["bound_checks"])
    assert (itdir / "iterate_n8.csv").exists()


def test_bad_json_is_config_error():
    res = run_cli("study", "--fixture", "sin", "--domain", "{not json",
                  "--out", "/tmp/never.json")
    assert res.returncode == 2


def test_selftest_deterministic_across_threads(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    ra = run_cli("selftest", "--threads", "1", "--no-timestamp", "--out", str(a))
    rb = run_cli("selftest", "--threads", "8", "--no-timestamp", "--out", str(b))
    assert ra.returncode == 0, ra.stdout + ra.stderr
    assert rb.returncode == 0
    assert a.read_bytes() == b.read_bytes()
    report = json.loads(a.read_text())
    assert report["pass"] and "threads" not in report
