import csv
import json

import numpy as np
import pytest

from twinclust.cli import main
from twinclust.dataio import DataMatrix, read_labels, save_csv, write_labels

from conftest import blobs2


@pytest.fixture
def blob_csv(tmp_path):
    X, y = blobs2()
    path = tmp_path / "blobs.csv"
    save_csv(DataMatrix(X, y), path)
    return path


def fit(blob_csv, out, *extra):
    return main(["fit", "--data", str(blob_csv), "--labels", "label", "--out", str(out), *extra])


def read_metrics(path):
    return dict(line.split("=") for line in path.read_text().split())


def test_fit_writes_artifacts(blob_csv, tmp_path):
    out = tmp_path / "run"
    assert fit(blob_csv, out, "--beta-autotune", "--save-matrices") == 0
    for name in ("labels.txt", "trace.txt", "metrics.txt", "manifest.json", "Z.npy", "P.npy"):
        assert (out / name).is_file()
    assert float(read_metrics(out / "metrics.txt")["acc"]) == 1.0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["n_clusters"] == 2
    assert len(manifest["data_sha256"]) == 64
    assert manifest["result"]["components_found"] == 2


def test_scmk_standard_bank(blob_csv, tmp_path):
    out = tmp_path / "mk"
    assert fit(blob_csv, out, "--algo", "scmk", "--kernel", "bank:standard", "--alpha", "0.01") == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert len(manifest["kernel_descriptors"]) == 12
    assert manifest["result"]["weights_sqrt_sum"] == pytest.approx(1.0, abs=1e-12)
    assert len((out / "weights.txt").read_text().splitlines()) == 12


@pytest.mark.parametrize("algo", ["kmeans", "kkm", "sc"])
def test_baseline_algorithms(algo, blob_csv, tmp_path):
    out = tmp_path / algo
    assert fit(blob_csv, out, "--algo", algo) == 0
    assert float(read_metrics(out / "metrics.txt")["acc"]) == 1.0


def test_missing_file_is_input_error(tmp_path, capsys):
    assert fit(tmp_path / "nope.csv", tmp_path / "o") == 2
    assert "error[IoError]" in capsys.readouterr().err


def test_invalid_alpha_exit_code(blob_csv, tmp_path, capsys):
    assert fit(blob_csv, tmp_path / "o", "--alpha", "-1") == 2
    assert "InvalidConfig" in capsys.readouterr().err


def test_output_dir_from_environment(blob_csv, tmp_path, monkeypatch):
    monkeypatch.setenv("TWINCLUST_OUTPUT_DIR", str(tmp_path / "env-out"))
    assert main(["fit", "--data", str(blob_csv), "--labels", "-1", "--algo", "kmeans"]) == 0
    assert (tmp_path / "env-out" / "labels.txt").is_file()


@pytest.mark.slow
def test_sweep_default_grid(blob_csv, tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "--data", str(blob_csv), "--labels", "label", "--out", str(out), "--max-outer", "10"]) == 0
    rows = list(csv.DictReader((out / "sweep.csv").open()))
    assert len(rows) == 16
    assert all(r["status"] == "ok" for r in rows)
    assert len({(r["alpha"], r["beta"]) for r in rows}) == 16


def test_sweep_cell_matches_fit(blob_csv, tmp_path):
    sweep_out, fit_out = tmp_path / "s", tmp_path / "f"
    args = ["--data", str(blob_csv), "--labels", "label", "--beta-autotune"]
    assert main(["sweep", *args, "--out", str(sweep_out), "--alpha-grid", "0.1", "--beta-grid", "1e-5"]) == 0
    assert main(["fit", *args, "--out", str(fit_out), "--alpha", "0.1", "--beta", "1e-5"]) == 0
    cell = sweep_out / "alpha=0.1_beta=1e-05" / "labels.txt"
    assert cell.read_bytes() == (fit_out / "labels.txt").read_bytes()


def test_sweep_failed_cell_is_recorded(blob_csv, tmp_path):
    out = tmp_path / "s"
    code = main(["sweep", "--data", str(blob_csv), "--labels", "label", "--out", str(out),
                 "--alpha-grid=-1,0.1", "--beta-grid", "1e-5", "--max-outer", "5"])
    assert code == 0
    rows = {r["alpha"]: r for r in csv.DictReader((out / "sweep.csv").open())}
    assert rows["-1"]["status"] == "failed" and "InvalidConfig" in rows["-1"]["error"]
    assert rows["0.1"]["status"] == "ok" and rows["0.1"]["acc"]


def test_sweep_parallel_matches_serial(blob_csv, tmp_path):
    args = ["--data", str(blob_csv), "--labels", "label", "--alpha-grid", "0.1,1", "--beta-grid", "1e-5", "--max-outer", "5"]
    assert main(["sweep", *args, "--out", str(tmp_path / "a")]) == 0
    assert main(["sweep", *args, "--out", str(tmp_path / "b"), "--jobs", "2"]) == 0
    assert (tmp_path / "a" / "sweep.csv").read_text() == (tmp_path / "b" / "sweep.csv").read_text()


def test_eval(tmp_path, capsys):
    truth = np.array([0, 0, 1, 1, 2, 2])
    write_labels(truth, tmp_path / "t.txt")
    write_labels([2, 2, 0, 0, 1, 1], tmp_path / "p.txt")
    assert main(["eval", "--pred", str(tmp_path / "p.txt"), "--truth", str(tmp_path / "t.txt"), "--out", str(tmp_path / "e")]) == 0
    metrics = read_metrics(tmp_path / "e" / "metrics.txt")
    assert metrics == {"acc": "1.000000", "nmi": "1.000000", "purity": "1.000000"}
    write_labels([0, 1, 0], tmp_path / "short.txt")
    assert main(["eval", "--pred", str(tmp_path / "short.txt"), "--truth", str(tmp_path / "t.txt")]) == 2
    assert "LengthMismatch" in capsys.readouterr().err


def test_config_file_and_override(blob_csv, tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text(f"[data]\ndata = {blob_csv}\nlabel-column = label\n[model]\nalgo = scsk\nalpha = 5\nbeta = 1e-5\nmax_outer = 4\n")
    out = tmp_path / "o"
    assert main(["fit", "--config", str(cfg), "--alpha", "0.2", "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["alpha"] == 0.2
    assert manifest["config"]["max_outer"] == 4
    cfg.write_text("[model]\nbogus = 1\n")
    assert main(["fit", "--config", str(cfg)]) == 2


def test_kernel_bank_cache(blob_csv, tmp_path, capsys):
    cache = tmp_path / "cache"
    args = ["kernel-bank", "--data", str(blob_csv), "--labels", "label", "--kernel", "bank:standard", "--cache-dir", str(cache)]
    assert main(args) == 0
    files = sorted(cache.iterdir())
    assert len(files) == 1
    stamp = files[0].stat().st_mtime_ns
    assert main(args) == 0
    assert files[0].stat().st_mtime_ns == stamp
    assert "cached 12 kernels (100x100)" in capsys.readouterr().out


def test_rerun_from_manifest_is_byte_identical(blob_csv, tmp_path):
    first = tmp_path / "a"
    assert fit(blob_csv, first, "--beta-autotune") == 0
    again = tmp_path / "b"
    assert main(["fit", "--from-manifest", str(first / "manifest.json"), "--out", str(again)]) == 0
    assert (first / "labels.txt").read_bytes() == (again / "labels.txt").read_bytes()
    a = json.loads((first / "manifest.json").read_text())
    b = json.loads((again / "manifest.json").read_text())
    a["config"].pop("out"), b["config"].pop("out")
    assert a == b
    np.testing.assert_array_equal(read_labels(first / "labels.txt"), read_labels(again / "labels.txt"))
