"""End-to-end tests for the orthonn command line.

Each test drives ``main(argv)`` in process and inspects exit codes,
stdout/stderr, and the artifact files every command leaves in its
output directory (model, history, metrics, manifest, reports).
"""

import json

import numpy as np
import pytest

from orthonn.cli import main
from orthonn.data import toy_dataset_path
from orthonn.training import load_network

pytestmark = pytest.mark.filterwarnings("ignore::UserWarning")


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _train_args(out, *extra):
    return (
        "train",
        "--data",
        toy_dataset_path(),
        "--arch",
        "pyramid:4,2",
        "--regime",
        "pyramid",
        "--epochs",
        "5",
        "--seed",
        "7",
        "--out",
        str(out),
        *extra,
    )


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def test_train_smoke(tmp_path, capsys):
    # [TRIVIAL: smoke] pyramid:4,2 on the bundled toy data exits 0 and
    # writes metrics with acc/auc keys.
    code, out, err = _run(capsys, *_train_args(tmp_path / "run"))
    assert code == 0, err
    run = tmp_path / "run"
    metrics = json.loads((run / "metrics.json").read_text())
    assert 0.0 <= metrics["acc"] <= 1.0
    assert 0.0 <= metrics["auc"] <= 1.0
    assert set(metrics["test"]["confusion"]) == {"tn", "fp", "fn", "tp"}
    assert "acc" in metrics["train"]

    net = load_network(str(run / "model.txt"))
    assert net.n_in == 4 and net.n_out == 2

    history = (run / "history.csv").read_text().strip().split("\n")
    assert history[0] == "epoch,loss,acc,auc,seconds"
    assert len(history) == 6

    manifest = json.loads((run / "manifest.json").read_text())
    assert manifest["command"] == "train"
    assert manifest["config"]["seed"] == 7
    assert manifest["config"]["arch"] == "pyramid:4,2"
    for key in ("python", "numpy", "orthonn"):
        assert key in manifest["versions"]

    metrics_csv = (run / "metrics.csv").read_text()
    assert metrics_csv.startswith("acc,auc,tn,fp,fn,tp\n")


def test_train_toy_accuracy_is_high(tmp_path, capsys):
    # The toy blobs are separable through the origin, so even the tiny
    # pyramid should classify nearly perfectly.
    code, _, err = _run(
        capsys, *_train_args(tmp_path / "run", "--epochs", "20", "--lr", "0.2")
    )
    assert code == 0, err
    metrics = json.loads((tmp_path / "run" / "metrics.json").read_text())
    assert metrics["acc"] >= 0.9


def test_train_determinism(tmp_path, capsys):
    # [TRIVIAL: determinism contract] identical config and seed give
    # identical epoch/loss/acc/auc history columns (wall-clock seconds
    # are the one legitimately nondeterministic column).
    code_a, _, _ = _run(capsys, *_train_args(tmp_path / "a"))
    code_b, _, _ = _run(capsys, *_train_args(tmp_path / "b"))
    assert code_a == code_b == 0

    def stable_columns(path):
        lines = (path / "history.csv").read_text().strip().split("\n")
        return [",".join(line.split(",")[:4]) for line in lines]

    assert stable_columns(tmp_path / "a") == stable_columns(tmp_path / "b")


def test_qnn_exact_vs_shots_acc_close(tmp_path, capsys):
    # [DERIVED: paired runs] exact and 10^4-shot training of the same
    # dense architecture land within 0.05 test accuracy on the toy set.
    common = (
        "train",
        "--data",
        toy_dataset_path(),
        "--arch",
        "qnn:4,4,2",
        "--epochs",
        "4",
        "--lr",
        "0.3",
        "--seed",
        "11",
    )
    code, _, err = _run(
        capsys,
        *common,
        "--regime",
        "qnn-exact",
        "--out",
        str(tmp_path / "exact"),
    )
    assert code == 0, err
    code, _, err = _run(
        capsys,
        *common,
        "--regime",
        "qnn-shots",
        "--shots",
        "10000",
        "--out",
        str(tmp_path / "shots"),
    )
    assert code == 0, err
    acc_exact = json.loads(
        (tmp_path / "exact" / "metrics.json").read_text()
    )["acc"]
    acc_shots = json.loads(
        (tmp_path / "shots" / "metrics.json").read_text()
    )["acc"]
    assert abs(acc_exact - acc_shots) < 0.05


def test_config_file_mirrors_flags(tmp_path, capsys):
    config = {
        "data": toy_dataset_path(),
        "arch": "pyramid:4,2",
        "regime": "pyramid",
        "epochs": 2,
        "seed": 5,
        "out": str(tmp_path / "from_config"),
    }
    cfg_path = tmp_path / "run.json"
    cfg_path.write_text(json.dumps(config))
    # flags override the config file: epochs becomes 3
    code, _, err = _run(
        capsys, "train", "--config", str(cfg_path), "--epochs", "3"
    )
    assert code == 0, err
    history = (
        (tmp_path / "from_config" / "history.csv")
        .read_text()
        .strip()
        .split("\n")
    )
    assert len(history) == 4  # header + 3 epochs
    manifest = json.loads(
        (tmp_path / "from_config" / "manifest.json").read_text()
    )
    assert manifest["config"]["epochs"] == 3
    assert manifest["config"]["seed"] == 5


def test_validation_errors_exit_1_with_json(tmp_path, capsys):
    # unknown regime/arch combinations and missing files are validation
    # failures: exit code 1 and machine-parsable JSON on stderr.
    code, _, err = _run(
        capsys,
        "train",
        "--arch",
        "pyramid:4,2",
        "--regime",
        "svb",
        "--out",
        str(tmp_path / "x"),
    )
    assert code == 1
    payload = json.loads(err.strip().split("\n")[-1])
    assert "error" in payload and "message" in payload

    code, _, err = _run(
        capsys,
        "train",
        "--data",
        str(tmp_path / "missing.csv"),
        "--arch",
        "pyramid:4,2",
        "--regime",
        "pyramid",
        "--out",
        str(tmp_path / "y"),
    )
    assert code == 1
    assert json.loads(err.strip().split("\n")[-1])["error"]

    code, _, err = _run(capsys, "train", "--arch", "nonsense")
    assert code == 1
    assert "message" in json.loads(err.strip().split("\n")[-1])

    code, _, err = _run(
        capsys,
        "train",
        "--arch",
        "qnn:4,2",
        "--regime",
        "qnn-exact",
        "--noise",
        "0.05",
        "--out",
        str(tmp_path / "z"),
    )
    assert code == 1
    assert "noise" in json.loads(err.strip().split("\n")[-1])["message"]


# ---------------------------------------------------------------------------
# bench-scaling
# ---------------------------------------------------------------------------


def test_bench_scaling_rows_and_param_counts(tmp_path, capsys):
    # [TRIVIAL] one row per (n, trial); the parameter column is the
    # closed form n(n-1)/2 + (2n-3) for an [n, n, 2] network.
    code, out, err = _run(
        capsys,
        "bench-scaling",
        "--n-list",
        "4,8",
        "--trials",
        "2",
        "--seed",
        "3",
        "--out",
        str(tmp_path / "bench"),
    )
    assert code == 0, err
    lines = (
        (tmp_path / "bench" / "scaling.csv").read_text().strip().split("\n")
    )
    assert lines[0] == "n,params,seconds_per_epoch"
    assert len(lines) == 5
    for line in lines[1:]:
        n, params, seconds = line.split(",")
        n = int(n)
        assert int(params) == n * (n - 1) // 2 + 2 * n - 3
        assert float(seconds) > 0.0
    fit = json.loads((tmp_path / "bench" / "fit.json").read_text())
    for key in ("a", "b", "c", "r_squared"):
        assert key in fit


def test_bench_scaling_single_n_row_count(tmp_path, capsys):
    # [TRIVIAL] a single-n run emits exactly `trials` data rows.
    code, _, err = _run(
        capsys,
        "bench-scaling",
        "--n-list",
        "4",
        "--trials",
        "3",
        "--out",
        str(tmp_path / "bench"),
    )
    assert code == 0, err
    lines = (
        (tmp_path / "bench" / "scaling.csv").read_text().strip().split("\n")
    )
    assert len(lines) == 4


def test_bench_scaling_requires_ascending(tmp_path, capsys):
    code, _, err = _run(
        capsys,
        "bench-scaling",
        "--n-list",
        "8,4",
        "--out",
        str(tmp_path / "bench"),
    )
    assert code == 1
    assert "n-list" in json.loads(err.strip().split("\n")[-1])["message"]


# ---------------------------------------------------------------------------
# decompose
# ---------------------------------------------------------------------------


def _write_matrix(path, m):
    np.savetxt(path, m, delimiter=",", fmt="%.17g")


def test_decompose_identity(tmp_path, capsys):
    # [TRIVIAL] identity -> all angles zero, no z flip.
    _write_matrix(tmp_path / "eye.csv", np.eye(8))
    code, out, err = _run(
        capsys,
        "decompose",
        "--matrix",
        str(tmp_path / "eye.csv"),
        "--out",
        str(tmp_path / "dec"),
    )
    assert code == 0, err
    report = json.loads((tmp_path / "dec" / "report.json").read_text())
    assert report["z_flip"] is False
    assert report["determinant_branch"] == "+1"
    assert report["round_trip_error"] < 1e-12
    layer_text = (tmp_path / "dec" / "layer.txt").read_text()
    assert layer_text.startswith("PYRAMID 8 8 0\n")
    angles = layer_text.strip().split("\n")[1].split()
    assert len(angles) == 28
    assert all(float(a) == 0.0 for a in angles)


def test_decompose_negative_determinant_permutation(tmp_path, capsys):
    # [DERIVED: rebuild check] a det = -1 permutation uses the z-flip
    # branch and rebuilds within 1e-8.
    perm = np.eye(8)[[1, 0, 2, 3, 4, 5, 6, 7]]
    assert np.linalg.det(perm) == pytest.approx(-1.0)
    _write_matrix(tmp_path / "perm.csv", perm)
    code, _, err = _run(
        capsys,
        "decompose",
        "--matrix",
        str(tmp_path / "perm.csv"),
        "--out",
        str(tmp_path / "dec"),
    )
    assert code == 0, err
    report = json.loads((tmp_path / "dec" / "report.json").read_text())
    assert report["z_flip"] is True
    assert report["determinant_branch"] == "-1"
    assert report["round_trip_error"] < 1e-8


def test_decompose_haar_16(tmp_path, capsys):
    # [DERIVED: rebuild check]
    rng = np.random.default_rng(99)
    q, r = np.linalg.qr(rng.standard_normal((16, 16)))
    q = q * np.sign(np.diag(r))
    _write_matrix(tmp_path / "haar.csv", q)
    code, _, err = _run(
        capsys,
        "decompose",
        "--matrix",
        str(tmp_path / "haar.csv"),
        "--out",
        str(tmp_path / "dec"),
    )
    assert code == 0, err
    report = json.loads((tmp_path / "dec" / "report.json").read_text())
    assert report["round_trip_error"] < 1e-8


def test_decompose_rejects_non_orthogonal(tmp_path, capsys):
    rng = np.random.default_rng(7)
    _write_matrix(tmp_path / "bad.csv", rng.standard_normal((6, 6)))
    code, _, err = _run(
        capsys,
        "decompose",
        "--matrix",
        str(tmp_path / "bad.csv"),
        "--out",
        str(tmp_path / "dec"),
    )
    assert code == 1
    payload = json.loads(err.strip().split("\n")[-1])
    assert payload["error"] == "NotOrthogonal"


# ---------------------------------------------------------------------------
# ip-demo
# ---------------------------------------------------------------------------


def _write_vector(path, v):
    path.write_text(",".join(repr(float(x)) for x in v) + "\n")


def test_ip_demo_identical_vectors(tmp_path, capsys):
    # [TRIVIAL + binomial bound] identical unit vectors have dot 1, and
    # the signed estimate lands within 2/sqrt(shots).
    v = np.ones(8) / np.sqrt(8.0)
    _write_vector(tmp_path / "x.csv", v)
    _write_vector(tmp_path / "w.csv", v)
    code, out, err = _run(
        capsys,
        "ip-demo",
        "--x",
        str(tmp_path / "x.csv"),
        "--w",
        str(tmp_path / "w.csv"),
        "--shots",
        "10000",
        "--seed",
        "13",
        "--out",
        str(tmp_path / "demo"),
    )
    assert code == 0, err
    assert out.startswith("quantity,value\n")
    report = json.loads((tmp_path / "demo" / "report.json").read_text())
    assert report["exact_dot"] == pytest.approx(1.0, abs=1e-12)
    assert abs(report["signed_estimate"] - 1.0) <= 2.0 / 100.0
    assert abs(report["squared_estimate"] - 1.0) <= 2.0 / 100.0
    assert report["discard_fraction"] == 0.0


def test_ip_demo_sweep_rmse_decreases(tmp_path, capsys):
    # [DERIVED: Monte-Carlo] the sweep's RMSE column is monotonically
    # non-increasing in at least 90% of adjacent level pairs.
    rng = np.random.default_rng(17)
    x = rng.standard_normal(8)
    w = rng.standard_normal(8)
    _write_vector(tmp_path / "x.csv", x / np.linalg.norm(x))
    _write_vector(tmp_path / "w.csv", w / np.linalg.norm(w))
    code, _, err = _run(
        capsys,
        "ip-demo",
        "--x",
        str(tmp_path / "x.csv"),
        "--w",
        str(tmp_path / "w.csv"),
        "--sweep",
        "100,1000,10000",
        "--seed",
        "19",
        "--out",
        str(tmp_path / "demo"),
    )
    assert code == 0, err
    lines = (
        (tmp_path / "demo" / "sweep.csv").read_text().strip().split("\n")
    )
    assert lines[0].startswith("n_shots,rmse_signed,rmse_squared")
    rows = [line.split(",") for line in lines[1:]]
    assert [int(r[0]) for r in rows] == [100, 1000, 10000]
    for col in (1, 2):
        values = [float(r[col]) for r in rows]
        drops = sum(
            1 for a, b in zip(values, values[1:]) if b <= a + 1e-15
        )
        assert drops / (len(values) - 1) >= 0.9


def test_ip_demo_mitigation_helps_under_noise(tmp_path, capsys):
    # [DERIVED: paired Monte-Carlo] with readout noise the mitigated
    # squared estimator has aggregate error at most the unmitigated one.
    rng = np.random.default_rng(23)
    x = rng.standard_normal(8)
    w = rng.standard_normal(8)
    _write_vector(tmp_path / "x.csv", x / np.linalg.norm(x))
    _write_vector(tmp_path / "w.csv", w / np.linalg.norm(w))
    code, _, err = _run(
        capsys,
        "ip-demo",
        "--x",
        str(tmp_path / "x.csv"),
        "--w",
        str(tmp_path / "w.csv"),
        "--shots",
        "4000",
        "--noise",
        "0.05",
        "--mitigate",
        "--seed",
        "29",
        "--out",
        str(tmp_path / "demo"),
    )
    assert code == 0, err
    report = json.loads((tmp_path / "demo" / "report.json").read_text())
    assert report["noise_p_flip"] == 0.05
    assert report["paired_squared_mse"]["mitigated"] <= (
        report["paired_squared_mse"]["unmitigated"]
    )
    assert report["discard_fraction"] > 0.0


def test_ip_demo_rejects_zero_vector(tmp_path, capsys):
    _write_vector(tmp_path / "x.csv", np.zeros(4))
    _write_vector(tmp_path / "w.csv", np.ones(4) / 2.0)
    code, _, err = _run(
        capsys,
        "ip-demo",
        "--x",
        str(tmp_path / "x.csv"),
        "--w",
        str(tmp_path / "w.csv"),
        "--out",
        str(tmp_path / "demo"),
    )
    assert code == 1
    assert json.loads(err.strip().split("\n")[-1])["error"] == "ZeroVector"


# ---------------------------------------------------------------------------
# manifests everywhere
# ---------------------------------------------------------------------------


def test_every_command_writes_a_manifest(tmp_path, capsys):
    _write_matrix(tmp_path / "eye.csv", np.eye(4))
    v = np.ones(4) / 2.0
    _write_vector(tmp_path / "v.csv", v)
    jobs = [
        _train_args(tmp_path / "t"),
        (
            "bench-scaling",
            "--n-list",
            "4",
            "--trials",
            "1",
            "--out",
            str(tmp_path / "b"),
        ),
        (
            "decompose",
            "--matrix",
            str(tmp_path / "eye.csv"),
            "--out",
            str(tmp_path / "d"),
        ),
        (
            "ip-demo",
            "--x",
            str(tmp_path / "v.csv"),
            "--w",
            str(tmp_path / "v.csv"),
            "--shots",
            "100",
            "--out",
            str(tmp_path / "i"),
        ),
    ]
    for job, sub in zip(jobs, ("t", "b", "d", "i")):
        code, _, err = _run(capsys, *job)
        assert code == 0, (job, err)
        manifest = json.loads(
            (tmp_path / sub / "manifest.json").read_text()
        )
        assert manifest["command"] == job[0]
        assert "seed" in manifest["config"]
        assert "numpy" in manifest["versions"]
