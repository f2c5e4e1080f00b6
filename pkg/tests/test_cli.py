import csv
import os

import numpy as np
import pytest

from sketchpipe import gen_clusters, read_sketch
from sketchpipe.cli import main
from sketchpipe.experiments import run_experiment, write_csv
from sketchpipe.io import write_dense


@pytest.fixture
def dense_file(tmp_path):
    X, labels = gen_clusters(32, 200, 3, separation=8.0, noise_sigma=1.0, seed=0)
    path = tmp_path / "data.dnse"
    write_dense(path, X)
    return str(path)


def read_rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_sketch_command_and_determinism(dense_file, tmp_path, capsys):
    out1 = str(tmp_path / "a.skch")
    out2 = str(tmp_path / "b.skch")
    assert main(["sketch", dense_file, out1, "--gamma", "0.25", "--seed", "9"]) == 0
    assert main(["sketch", dense_file, out2, "--gamma", "0.25", "--seed", "9"]) == 0
    assert open(out1, "rb").read() == open(out2, "rb").read()
    captured = capsys.readouterr().out
    assert "passes: 1" in captured
    sk = read_sketch(out1)
    assert sk.n == 200
    assert sk.m == round(0.25 * 32)


def test_sketch_gamma_one_roundtrips_header(dense_file, tmp_path):
    out = str(tmp_path / "full.skch")
    assert main([
        "sketch", dense_file, out, "--gamma", "1.0", "--transform", "none", "--seed", "4",
    ]) == 0
    sk = read_sketch(out)
    assert sk.spec.p == 32 and sk.spec.p_pad == 32 and sk.m == 32
    from sketchpipe.io import read_dense

    assert np.array_equal(sk.densify(), read_dense(dense_file))


def test_pca_command(dense_file, tmp_path, capsys):
    skch = str(tmp_path / "x.skch")
    main(["sketch", dense_file, skch, "--gamma", "0.5", "--seed", "2"])
    out_csv = str(tmp_path / "pca.csv")
    rc = main(["pca", skch, "-k", "2", "--out-csv", out_csv, "--reference", dense_file])
    assert rc == 0
    rows = read_rows(out_csv)
    assert len(rows) == 32
    assert set(rows[0]) == {"coord", "mean", "pc1", "pc2"}
    assert "explained variance" in capsys.readouterr().out


def test_kmeans_command_dense(dense_file, tmp_path, capsys):
    out_csv = str(tmp_path / "km.csv")
    rc = main([
        "kmeans", dense_file, "-K", "3", "--gamma", "0.3", "--replicates", "2",
        "--n-init", "2", "--seed", "5", "--out-csv", out_csv,
    ])
    assert rc == 0
    rows = read_rows(out_csv)
    assert [r["replicate"] for r in rows] == ["0", "1"]
    assert "objective mean" in capsys.readouterr().out


def test_kmeans_command_two_pass_and_baseline(dense_file, tmp_path):
    rc = main([
        "kmeans", dense_file, "-K", "3", "--gamma", "0.3", "--passes", "2",
        "--replicates", "1", "--n-init", "2", "--seed", "6",
        "--out-csv", str(tmp_path / "a.csv"),
    ])
    assert rc == 0
    rc = main([
        "kmeans", dense_file, "-K", "3", "--gamma", "0.3",
        "--baseline", "feature-extraction", "--replicates", "1", "--n-init", "2",
        "--seed", "7", "--out-csv", str(tmp_path / "b.csv"),
    ])
    assert rc == 0


def test_kmeans_command_sketch_input(dense_file, tmp_path):
    skch = str(tmp_path / "x.skch")
    main(["sketch", dense_file, skch, "--gamma", "0.4", "--seed", "8"])
    rc = main([
        "kmeans", skch, "-K", "3", "--replicates", "1", "--n-init", "2",
        "--seed", "9", "--out-csv", str(tmp_path / "c.csv"),
    ])
    assert rc == 0
    # two passes are impossible from a sketch alone
    assert main(["kmeans", skch, "-K", "3", "--passes", "2"]) == 1


def test_bounds_command(capsys):
    assert main([
        "bounds", "--which", "cor4", "-p", "512", "-n", "100000",
        "--t", "0.01", "--eta", "1",
    ]) == 0
    out = capsys.readouterr().out
    assert out.startswith("min_m:")
    assert abs(float(out.split(":")[1]) - 137.2) < 0.1
    assert main([
        "bounds", "--which", "hk", "-p", "100", "-m", "30",
        "--n-k", "1000", "--delta", "0.001",
    ]) == 0


def test_experiment_command_writes_csv(tmp_path, capsys):
    rc = main([
        "experiment", "--name", "fig7", "--out-dir", str(tmp_path),
        "--scale", "0.02", "--seed", "3",
    ])
    assert rc == 0
    rows = read_rows(tmp_path / "fig7.csv")
    assert set(rows[0]) == {"n", "mean_dev", "max_dev", "bound_t"}
    assert len(rows) == 3


def test_experiment_identical_invocations_identical_csv(tmp_path):
    run_experiment("fig7", str(tmp_path / "one"), seed=5, scale=0.02)
    run_experiment("fig7", str(tmp_path / "two"), seed=5, scale=0.02)
    a = open(tmp_path / "one" / "fig7.csv").read()
    b = open(tmp_path / "two" / "fig7.csv").read()
    assert a == b


def test_experiment_unknown_name(tmp_path):
    with pytest.raises(SystemExit):
        main(["experiment", "--name", "nope", "--out-dir", str(tmp_path)])


def test_mnist_experiment_missing_files_actionable(tmp_path):
    rc = main([
        "experiment", "--name", "mnist-accuracy", "--out-dir", str(tmp_path),
        "--mnist-dir", str(tmp_path / "nowhere"),
    ])
    assert rc == 1


def test_write_csv_rfc4180(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(path, ["a", "b"], [{"a": 1, "b": 2.5}])
    assert open(path, newline="").read() == "a,b\r\n1,2.5\r\n"
