import numpy as np
import pytest

from pdcnet.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_unknown_flag_is_usage_error(capsys):
    code, _, err = run(capsys, "train", "--bogus")
    assert code == 1 and "usage:" in err


def test_no_command(capsys):
    code, _, err = run(capsys)
    assert code == 1 and "usage:" in err


def test_synth_layout(tmp_path, capsys):
    code, out, _ = run(capsys, "synth", "--out", str(tmp_path / "d"), "--n", "64", "--size", "64", "--seed", "7")
    assert code == 0
    for split, n in (("train", 64), ("test", 16)):
        root = tmp_path / "d" / split
        assert len((root / "manifest.csv").read_text().splitlines()) == n + 1
        assert len(list((root / "images").iterdir())) == n


def test_train_then_eval(tmp_path, capsys):
    d, r = tmp_path / "d", tmp_path / "r"
    assert run(capsys, "synth", "--out", str(d), "--n", "8", "--n-test", "4")[0] == 0
    code, _, _ = run(
        capsys, "train", "--data", str(d), "--out", str(r), "--epochs", "1", "--batch", "4",
        "--channels", "8,8,8,8", "--afd-width", "8", "--mgc-k", "2", "--mgc-n", "2", "--mda-variant", "dual",
    )
    assert code == 0
    assert (r / "train_log.png").exists() and (r / "metrics.png").exists()
    report = tmp_path / "e" / "r.csv"
    code, out, _ = run(capsys, "eval", "--ckpt", str(r / "checkpoint.pdcc"), "--data", str(d), "--report", str(report))
    assert code == 0
    lines = report.read_text().splitlines()
    assert lines[0] == "class,dsc,mcc,acc,hd,hd95,n_images,n_hd_skipped"
    assert [l.split(",")[0] for l in lines[1:]] == ["PRI-Neg", "PRI-Pos"]
    assert report.read_text() == (r / "metrics.csv").read_text()
    assert (tmp_path / "e" / "r.png").exists()


def test_missing_checkpoint_is_data_error(tmp_path, capsys):
    code, _, err = run(capsys, "eval", "--ckpt", str(tmp_path / "x.pdcc"), "--data", str(tmp_path), "--report", str(tmp_path / "r.csv"))
    assert code == 2 and "x.pdcc" in err


def test_corrupt_checkpoint_is_data_error(tmp_path, capsys):
    (tmp_path / "x.pdcc").write_bytes(b"JUNKJUNKJUNK")
    code, _, _ = run(capsys, "eval", "--ckpt", str(tmp_path / "x.pdcc"), "--data", str(tmp_path), "--report", str(tmp_path / "r.csv"))
    assert code == 2


def test_bad_size_is_usage_error(tmp_path, capsys):
    code, _, err = run(capsys, "train", "--data", str(tmp_path), "--out", str(tmp_path / "o"), "--size", "50")
    assert code == 1 and "32" in err


def test_gradcheck_table(capsys):
    code, out, _ = run(capsys, "gradcheck", "--module", "strip", "--eps", "1e-5")
    assert code == 0
    assert out.count(" ok") == 4 and "max_rel_err" in out


def test_gradcheck_failure_exit_code(capsys):
    code, out, _ = run(capsys, "gradcheck", "--module", "mgc", "--tol", "1e-15")
    assert code == 3 and "FAIL" in out


def test_bench_table(tmp_path, capsys):
    code, out, _ = run(capsys, "bench", "--sizes", "16", "--repeat", "1", "--report", str(tmp_path / "b.csv"))
    assert code == 0
    rows = (tmp_path / "b.csv").read_text().splitlines()
    assert rows[0] == "direction,size,ns_per_elem" and len(rows) == 5


def test_thread_env_var(monkeypatch, capsys):
    monkeypatch.setenv("PDC_THREADS", "1")
    assert run(capsys, "gradcheck", "--module", "mgc")[0] == 0
    monkeypatch.setenv("PDC_THREADS", "many")
    assert run(capsys, "gradcheck", "--module", "mgc")[0] == 1


def test_module_entry_point(tmp_path):
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "pdcnet", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "gradcheck" in proc.stdout
