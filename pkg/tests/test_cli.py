import json
import subprocess
import sys

import numpy as np
import pytest

from metaset import io
from metaset.cli import main


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def _psd(n, seed):
    x = np.random.default_rng(seed).standard_normal((n, n))
    return x @ x.T / n


@pytest.fixture
def kernels(tmp_path):
    io.write_kernel(tmp_path / "lp.kmat", _psd(6, 0), "property")
    io.write_kernel(tmp_path / "ls.kmat", _psd(6, 1), "shape")
    return tmp_path / "lp.kmat", tmp_path / "ls.kmat"


def test_expr_eval(capsys):
    code, out, _ = run(["expr", "eval", "--expr", "cos(X)+cos(Y)+cos(Z)", "--point", "0,0,0"], capsys)
    assert code == 0 and float(out) == 3.0


def test_expr_syntax_error_exit_code(capsys):
    code, _, err = run(["expr", "eval", "--expr", "cos(", "--point", "0"], capsys)
    assert code == 2 and "offset 4" in err


def test_expr_dups(tmp_path, capsys):
    (tmp_path / "c.txt").write_text("A | cos(X)+cos(Y) | LE\nB | 2*(cos(X)+cos(Y)) | LE\n")
    code, out, _ = run(["expr", "dups", "--catalog", str(tmp_path / "c.txt"), "--dims", "2"], capsys)
    assert code == 0 and out.split() == ["A", "B"]


def test_select_run_and_sweep(kernels, tmp_path, capsys):
    lp, ls = kernels
    code, out, _ = run(["select", "--lp", str(lp), "--ls", str(ls), "--w", "1", "--k", "3"], capsys)
    sel = json.loads(out)
    assert code == 0 and sel["k"] == 3 and sel["w"] == 1.0
    code, out, _ = run(["select", "sweep", "--lp", str(lp), "--ls", str(ls), "--k", "2",
                        "--weights", "0,1", "--out", str(tmp_path / "s.json")], capsys)
    assert code == 0 and len(json.loads((tmp_path / "s.json").read_text())) == 2


def test_select_not_psd_exit_code(tmp_path, capsys):
    io.write_kernel(tmp_path / "bad.kmat", np.array([[1.0, 2.0], [2.0, 1.0]]))
    code, _, err = run(["select", "--lp", str(tmp_path / "bad.kmat"), "--ls", str(tmp_path / "bad.kmat"),
                        "--k", "1"], capsys)
    assert code == 3 and "numerical" in err


def test_select_bad_file_exit_code(tmp_path, capsys):
    (tmp_path / "junk.kmat").write_bytes(b"JUNK")
    code, _, _ = run(["select", "--lp", str(tmp_path / "junk.kmat"), "--ls", str(tmp_path / "junk.kmat"),
                      "--k", "1"], capsys)
    assert code == 2


def test_report_selection(kernels, tmp_path, capsys):
    lp, ls = kernels
    run(["select", "--lp", str(lp), "--ls", str(ls), "--k", "3", "--out", str(tmp_path / "sel.json")], capsys)
    code, out, _ = run(["report", "--selection", str(tmp_path / "sel.json"), "--lp", str(lp),
                        "--ls", str(ls), "--trials", "20"], capsys)
    assert code == 0 and "rank_shape" in out


def test_design_flow(tmp_path, capsys):
    data = tmp_path / "data"
    assert run(["design", "dataset", "--out", str(data), "--count", "3", "--seed", "2"], capsys)[0] == 0
    manifest = data / "manifest.json"
    assert len(io.read_manifest(manifest)) == 3
    prob = tmp_path / "p.json"
    assert run(["design", "problem", "--out", str(prob), "--rows", "2", "--cols", "2", "--m", "2"], capsys)[0] == 0
    code, _, _ = run(["metrics", "kernel", "--manifest", str(manifest), "--space", "shape2d",
                      "--out", str(tmp_path / "s.kmat")], capsys)
    assert code == 0 and io.read_kernel(tmp_path / "s.kmat")[0].shape == (3, 3)
    report = tmp_path / "r.csv"
    code, out, _ = run(["design", "ga", "--problem", str(prob), "--manifest", str(manifest),
                        "--runs", "2", "--population", "6", "--generations", "3",
                        "--out", str(report)], capsys)
    assert code in (0, 3)  # 3 only when no run reaches N_dc = 0
    assert "r_dc mean" in out and report.is_file()
    code, out, _ = run(["report", "--design", str(report)], capsys)
    assert code == 0 and "MSE mean" in out


def test_missing_file_exit_code(tmp_path, capsys):
    code, _, _ = run(["design", "ga", "--problem", str(tmp_path / "none.json"),
                      "--manifest", str(tmp_path / "none.json")], capsys)
    assert code == 2


def test_help_lists_subcommands():
    out = subprocess.run([sys.executable, "-m", "metaset.cli", "--help"], capture_output=True, text=True)
    assert out.returncode == 0
    for name in ("expr", "isogen", "metrics", "select", "design", "pipeline", "report"):
        assert name in out.stdout


def test_report_needs_arguments():
    with pytest.raises(SystemExit) as err:
        main(["report"])
    assert err.value.code == 2


def test_pipeline_command(tmp_path, capsys):
    (tmp_path / "cat.txt").write_text("P-LE | cos(X)+cos(Y)+cos(Z) | LE\n"
                                      "G-LE | sin(X)*cos(Y)+sin(Y)*cos(Z)+sin(Z)*cos(X) | LE\n")
    cfg = {"catalog": "cat.txt", "out": "run", "resolution": 16, "samples": 2, "points": 128,
           "weights": [0.0, 1.0], "subset_sizes": [1, 2], "baseline_trials": 10}
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    code, out, _ = run(["pipeline", "--config", str(tmp_path / "cfg.json")], capsys)
    assert code == 0 and "2 families" in out
    assert (tmp_path / "run" / "selections" / "k2_w1.00.json").is_file()
    cfg["subset_sizes"] = [3]
    (tmp_path / "cfg.json").write_text(json.dumps(cfg))
    code, _, err = run(["pipeline", "--config", str(tmp_path / "cfg.json")], capsys)
    assert code == 2 and "select" in err
