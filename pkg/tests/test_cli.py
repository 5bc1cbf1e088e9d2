import json
import subprocess
import sys

import numpy as np
import pytest

from ralign.cli import main
from ralign.io_formats import write_csv_repr, write_repr

CFG = """ambient_dim = 6
eta1 = 1.0, 0.6, 0.3
eta2 = 0.9, 0.4
C = 0.8, 0 ; 0, 0.5 ; 0, 0
seed = 5
"""


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "spec.cfg"
    p.write_text(CFG)
    return p


@pytest.fixture
def feats(tmp_path, rng):
    x = rng.standard_normal((60, 4))
    y = np.tanh(x @ rng.standard_normal((4, 3)))
    write_repr(x, tmp_path / "x.raln", "x")
    write_repr(y, tmp_path / "y.raln", "y")
    return tmp_path / "x.raln", tmp_path / "y.raln"


def test_align_self_cka_is_one(feats, tmp_path, capsys):
    x, _ = feats
    out = tmp_path / "r.json"
    code, _, err = run(["align", x, x, "--metric", "cka", "--out", out], capsys)
    assert code == 0
    assert "seed=0" in err
    rep = json.loads(out.read_text())
    assert rep["metrics"]["cka"] == pytest.approx(1.0, abs=1e-12)
    assert rep["config"]["subcommand"] == "align" and rep["schema_version"] == 1


def test_align_mismatch_exit_2(feats, tmp_path, rng, capsys):
    x, _ = feats
    write_repr(rng.standard_normal((59, 2)), tmp_path / "short.raln")
    code, _, err = run(["align", x, tmp_path / "short.raln"], capsys)
    assert code == 2
    assert json.loads(err.strip().splitlines()[-1])["error"] == "MismatchedSampleCount"


def test_align_all_metrics_and_csv(feats, tmp_path, capsys):
    x, y = feats
    code, out, _ = run(["align", x, y, "--metric", "all", "--kernel", "rbf:median", "--out", tmp_path / "r.csv", "--format", "csv"], capsys)
    assert code == 0
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "metric,value"
    assert {l.split(",")[0] for l in lines[1:]} >= {"ka", "cka", "hsic", "spectral_ka", "gaussian_w2"}
    assert "distance_alignment" in out


def test_threads_do_not_change_reports(feats, tmp_path, capsys):
    x, y = feats
    blobs = []
    for k in (1, 4):
        p = tmp_path / f"t{k}.json"
        assert run(["align", x, y, "--metric", "all", "--kernel", "rbf:0.5", "--threads", k, "--out", p], capsys)[0] == 0
        blobs.append(p.read_bytes())
    assert blobs[0] == blobs[1]


def test_task_oracle_kernel(tmp_path, rng, capsys):
    y = rng.choice([-1.0, 1.0], size=30)
    write_repr(np.outer(y, y), tmp_path / "k.raln")
    write_csv_repr(y, tmp_path / "y.csv")
    out = tmp_path / "t.json"
    code, _, _ = run(["task", tmp_path / "k.raln", tmp_path / "y.csv", "--kernel", "precomputed", "--out", out], capsys)
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["metrics"]["kta"] == pytest.approx(1.0, abs=1e-12)
    assert rep["metrics"]["parzen_bound"] == pytest.approx(0.0, abs=1e-12)
    c = rep["metrics"]["cumulative_power"]
    assert all(a <= b + 1e-15 for a, b in zip(c, c[1:]))


def test_task_kare_identity(tmp_path, rng, capsys):
    y = rng.standard_normal(25)
    write_repr(np.eye(25), tmp_path / "k.raln")
    write_csv_repr(y, tmp_path / "y.csv")
    out = tmp_path / "t.json"
    code, _, _ = run(["task", tmp_path / "k.raln", tmp_path / "y.csv", "--kernel", "precomputed", "--metric", "kare", "--lambdas", "1e-4,1,1e6", "--out", out], capsys)
    assert code == 0
    pairs = json.loads(out.read_text())["metrics"]["kare"]
    assert [p[0] for p in pairs] == [1e-4, 1.0, 1e6]
    for _, v in pairs:
        assert v == pytest.approx(y @ y / 25, rel=1e-8)


def test_synth_same_seed_byte_identical(cfg, tmp_path, capsys):
    outs = []
    for tag in ("a", "b"):
        args = ["synth", cfg, "--n", 50, "--left-out", tmp_path / f"{tag}1.raln", "--right-out", tmp_path / f"{tag}2.raln", "--out", tmp_path / f"{tag}.json"]
        assert run(args, capsys)[0] == 0
        outs.append([(tmp_path / f"{tag}{s}").read_bytes() for s in ("1.raln", "2.raln", ".json")])
    assert outs[0] == outs[1]
    rep = json.loads((tmp_path / "a.json").read_text())
    assert rep["spec"]["seed"] == 5 and rep["config"]["seed"] == 5
    run(["synth", cfg, "--n", 50, "--seed", 6, "--left-out", tmp_path / "c1.raln"], capsys)
    assert (tmp_path / "c1.raln").read_bytes() != outs[0][0]


def test_synth_unrealizable_overlap(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text("ambient_dim = 4\neta1 = 1\neta2 = 1\nC = 1.5\n")
    code, _, err = run(["synth", p, "--n", 10], capsys)
    assert code == 2
    assert json.loads(err.strip().splitlines()[-1])["error"] == "UnrealizableOverlap"


@pytest.fixture
def tanh_instance(cfg, tmp_path, rng, capsys):
    V = rng.standard_normal((4, 2))
    out = rng.standard_normal((1, 4))
    write_csv_repr(V, tmp_path / "V.csv")
    write_csv_repr(out, tmp_path / "O.csv")
    args = ["synth", cfg, "--n", 400, "--noise", 0.1, "--head", "tanh", "--head-weights", tmp_path / "V.csv", "--head-out", tmp_path / "O.csv"]
    args += ["--left-out", tmp_path / "f1.raln", "--right-out", tmp_path / "f2.raln", "--targets-out", tmp_path / "y.raln"]
    assert run(args, capsys)[0] == 0
    return tmp_path


def test_stitch_thm2_tanh(tanh_instance, capsys):
    d = tanh_instance
    out = d / "s.json"
    args = ["stitch", d / "f1.raln", d / "f2.raln", d / "y.raln", "--mode", "thm2", "--head", "tanh"]
    args += ["--head-weights", d / "V.csv", "--head-out", d / "O.csv", "--out", out]
    code, _, _ = run(args, capsys)
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["ok"] is True
    assert all(q["satisfied"] for q in rep["inequalities"])


def test_stitch_lemma2_linear(cfg, tmp_path, rng, capsys):
    write_csv_repr(rng.standard_normal((2, 2)), tmp_path / "W.csv")
    args = ["synth", cfg, "--n", 300, "--noise", 0.2, "--head-weights", tmp_path / "W.csv"]
    args += ["--left-out", tmp_path / "f1.raln", "--right-out", tmp_path / "f2.raln", "--targets-out", tmp_path / "y.raln"]
    assert run(args, capsys)[0] == 0
    out = tmp_path / "s.json"
    code, _, _ = run(["stitch", tmp_path / "f1.raln", tmp_path / "f2.raln", tmp_path / "y.raln", "--mode", "lemma2", "--head-weights", tmp_path / "W.csv", "--out", out], capsys)
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["ok"]
    assert all(abs(q["slack"]) < 1e-8 for q in rep["inequalities"] if q["asserted"])


def test_stitch_fit_only(tanh_instance, capsys):
    d = tanh_instance
    out = d / "f.json"
    code, _, _ = run(["stitch", d / "f1.raln", d / "f2.raln", d / "y.raln", "--mode", "fit-only", "--out", out], capsys)
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["a_tilde"] >= 0 and rep["inequalities"] == []


def test_concentrate_csv_and_exponent(cfg, tmp_path, capsys):
    out, csv_out = tmp_path / "c.json", tmp_path / "c.csv"
    code, stdout, _ = run(["concentrate", cfg, "--n-grid", "64,256,1024", "--trials", 60, "--out", out, "--csv-out", csv_out], capsys)
    assert code == 0
    rows = csv_out.read_text().splitlines()
    assert rows[0] == "n,trial,deviation" and len(rows) == 1 + 3 * 60
    rep = json.loads(out.read_text())
    assert -0.8 < rep["rate_exponent"] < -0.2
    assert "rate_exponent" in stdout


def test_console_script_entry(feats):
    x, _ = feats
    res = subprocess.run([sys.executable, "-m", "ralign.cli", "align", str(x), str(x), "--metric", "ka", "--seed", "3"], capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.split()[0] == "ka"
    assert res.stderr == ""


def test_bad_seed_rejected(feats):
    x, _ = feats
    res = subprocess.run([sys.executable, "-m", "ralign.cli", "align", str(x), str(x), "--seed", "-1"], capture_output=True, text=True)
    assert res.returncode == 2
