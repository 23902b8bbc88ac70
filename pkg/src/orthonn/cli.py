"""Command-line front end.

Four subcommands cover the library's workflows:

``train``
    Fit a pyramid or dense network on a CSV dataset and write the
    model, per-epoch history, and evaluation metrics to a directory.
``bench-scaling``
    Time pyramid training epochs across a list of widths and fit the
    measured cost to a quadratic in n.
``decompose``
    Factor an orthogonal matrix CSV into pyramid angles plus an
    optional sign flip, with a round-trip verification report.
``ip-demo``
    Estimate one inner product from shots, optionally sweeping shot
    budgets or comparing mitigation against raw noisy readout.

Every command accepts ``--config FILE`` pointing at a JSON object whose
keys mirror the command's flags one to one; explicit flags override the
file.  Every command writes ``manifest.json`` (the resolved
configuration plus library versions) into its output directory so a run
can be reproduced exactly.  Exit codes: 0 on success, 1 for validation
problems, 2 for runtime failures.  Failures print a single JSON object
to stderr with ``error`` and ``message`` fields.
"""

import argparse
import json
import platform
import sys
from pathlib import Path

import numba
import numpy as np

from orthonn import __version__

from .data import (
    Dataset,
    balance_dataset,
    evaluate,
    fit_pca,
    load_csv,
    metrics_to_csv,
    split_dataset,
    toy_dataset_path,
    transform,
)
from .errors import (
    AllDiscarded,
    DimensionMismatch,
    NonFiniteLoss,
    OrthoNNError,
    QrFailure,
    SvdFailure,
    ZeroVector,
)
from .pyramid import decompose, extract_matrix, num_angles
from .shots import (
    BitFlipNoise,
    ShotPlan,
    derive_seed,
    signed_ip_estimate,
    square_ip_estimate,
)
from .training import (
    TrainConfig,
    history_to_csv,
    predict_scores,
    random_dense_network,
    random_pyramid_network,
    save_network,
    train,
)

__all__ = ["main", "UsageError"]


class UsageError(OrthoNNError):
    """A problem with flags, config files, or input files."""


# Errors that occur after validation, while a command is running.
_RUNTIME_ERRORS = (NonFiniteLoss, SvdFailure, QrFailure, AllDiscarded)

# CLI regime names to training-loop regime names.
_REGIME_MAP = {
    "pyramid": "pyramid",
    "svb": "svb",
    "stiefel": "stiefel",
    "dense": "dense_exact",
    "qnn-exact": "dense_exact",
    "qnn-shots": "dense_shots",
}

# Named sub-streams split off the user's seed so that data handling,
# initialization, training, and shot noise never share randomness.
_LANE_SPLIT = 1
_LANE_INIT = 2
_LANE_TRAIN = 3
_LANE_SHOTS = 4
_LANE_BALANCE = 5
_LANE_BENCH = 6
_LANE_IP = 11
_LANE_PAIRED = 12
_LANE_SWEEP = 13

_TEST_FRACTION = 0.25
_BENCH_SAMPLES = 256
_SWEEP_REPEATS = 50


class _Parser(argparse.ArgumentParser):
    """argparse parser whose failures become UsageError (exit code 1)."""

    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# flag tables: (flag, kind, default, help, choices)
# ---------------------------------------------------------------------------

_TRAIN_FIELDS = (
    ("data", "str", None, "dataset CSV; defaults to the bundled toy set", None),
    ("arch", "str", None, "pyramid:a,b[,c...] or qnn:a,b,c", None),
    ("regime", "str", None, "training regime", tuple(_REGIME_MAP)),
    ("shots", "int", 10000, "shots per inner product (qnn-shots only)", None),
    ("noise", "float", 0.0, "readout bit-flip probability (qnn-shots only)", None),
    ("mitigate", "bool", False, "discard corrupted readouts (qnn-shots only)", None),
    ("balance", "bool", False, "undersample the majority class before splitting", None),
    ("epochs", "int", 20, "training epochs", None),
    ("lr", "float", 0.05, "learning rate", None),
    ("batch", "int", 16, "minibatch size", None),
    ("seed", "int", 0, "root random seed", None),
    ("out", "str", None, "output directory", None),
)

_BENCH_FIELDS = (
    ("n-list", "str", None, "comma-separated layer widths, ascending", None),
    ("trials", "int", 3, "timed epochs per width", None),
    ("seed", "int", 0, "root random seed", None),
    ("out", "str", None, "output directory", None),
)

_DECOMPOSE_FIELDS = (
    ("matrix", "str", None, "square orthogonal matrix as headerless CSV", None),
    ("seed", "int", 0, "recorded in the manifest; unused otherwise", None),
    ("out", "str", None, "output directory", None),
)

_IP_FIELDS = (
    ("x", "str", None, "first vector as a one-line or one-column CSV", None),
    ("w", "str", None, "second vector, same length as --x", None),
    ("shots", "int", 10000, "shot budget for the headline estimates", None),
    ("noise", "float", 0.0, "readout bit-flip probability", None),
    ("mitigate", "bool", False, "discard corrupted readouts", None),
    ("sweep", "str", None, "comma-separated shot budgets to sweep, ascending", None),
    ("seed", "int", 0, "root random seed", None),
    ("out", "str", None, "output directory", None),
)


def _add_arguments(sub, fields):
    sub.add_argument(
        "--config",
        default=None,
        metavar="FILE",
        help="JSON file whose keys mirror these flags; flags win",
    )
    for flag, kind, _default, help_text, choices in fields:
        if kind == "bool":
            sub.add_argument(
                f"--{flag}",
                action="store_const",
                const=True,
                default=None,
                help=help_text,
            )
        else:
            sub.add_argument(
                f"--{flag}",
                type={"int": int, "float": float, "str": str}[kind],
                default=None,
                choices=choices,
                help=help_text,
            )


def _build_parser():
    parser = _Parser(
        prog="orthonn",
        description="orthogonal neural networks from unary rotation circuits",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    _add_arguments(
        sub.add_parser("train", help="fit a network on a CSV dataset"),
        _TRAIN_FIELDS,
    )
    _add_arguments(
        sub.add_parser("bench-scaling", help="time epochs across widths"),
        _BENCH_FIELDS,
    )
    _add_arguments(
        sub.add_parser("decompose", help="factor an orthogonal matrix"),
        _DECOMPOSE_FIELDS,
    )
    _add_arguments(
        sub.add_parser("ip-demo", help="sampled inner-product estimates"),
        _IP_FIELDS,
    )
    return parser


# ---------------------------------------------------------------------------
# config resolution
# ---------------------------------------------------------------------------


def _coerce(flag, value, kind):
    if kind == "bool" and isinstance(value, bool):
        return value
    if not isinstance(value, bool):
        if kind == "int" and isinstance(value, int):
            return int(value)
        if kind == "float" and isinstance(value, (int, float)):
            return float(value)
        if kind == "str" and isinstance(value, str):
            return value
    raise UsageError(f"config key {flag!r} expects a {kind}, got {value!r}")


def _read_config_file(path, fields):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    known = {flag for flag, *_ in fields}
    for key in raw:
        if key not in known:
            raise UsageError(f"unknown config key {key!r}")
    return raw


def _resolve(ns, fields):
    """Merge flags over the config file over defaults.

    Returns the resolved configuration dict (keyed by flag name) and
    the set of flags that were given explicitly by either route.
    """
    from_file = {}
    if ns.config is not None:
        from_file = _read_config_file(ns.config, fields)
    resolved = {}
    provided = set()
    for flag, kind, default, _help, choices in fields:
        flag_value = getattr(ns, flag.replace("-", "_"))
        if flag_value is not None:
            resolved[flag] = flag_value
            provided.add(flag)
        elif flag in from_file:
            resolved[flag] = _coerce(flag, from_file[flag], kind)
            provided.add(flag)
        else:
            resolved[flag] = default
        if choices and resolved[flag] is not None and resolved[flag] not in choices:
            raise UsageError(
                f"--{flag} must be one of {', '.join(choices)}, "
                f"got {resolved[flag]!r}"
            )
    return resolved, provided


def _ensure_out(cfg):
    out_dir = Path(cfg["out"])
    out_dir.mkdir(parents=True, exist_ok=True)
    return out_dir


def _write_manifest(out_dir, command, cfg):
    manifest = {
        "command": command,
        "config": dict(cfg),
        "seed": cfg.get("seed", 0),
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "numba": numba.__version__,
            "orthonn": __version__,
        },
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


# ---------------------------------------------------------------------------
# shared input helpers
# ---------------------------------------------------------------------------


def _parse_int_list(text, flag):
    try:
        values = tuple(int(tok) for tok in str(text).split(","))
    except ValueError:
        raise UsageError(
            f"--{flag} expects comma-separated integers, got {text!r}"
        ) from None
    if not values:
        raise UsageError(f"--{flag} is empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise UsageError(f"--{flag} must be strictly ascending, got {text!r}")
    return values


def _parse_arch(text):
    parts = str(text).split(":")
    if len(parts) != 2 or parts[0] not in ("pyramid", "qnn"):
        raise UsageError(
            f"architecture {text!r} is not pyramid:a,b[,c...] or qnn:a,b,c"
        )
    prefix, tail = parts
    try:
        widths = tuple(int(tok) for tok in tail.split(","))
    except ValueError:
        raise UsageError(f"architecture widths in {text!r} must be integers") from None
    if len(widths) < 2 or any(w < 2 for w in widths):
        raise UsageError(
            f"architecture {text!r} needs at least two widths, each >= 2"
        )
    if widths[-1] != 2:
        raise UsageError("the final layer width must be 2 (binary score head)")
    if prefix == "pyramid" and any(b > a for a, b in zip(widths, widths[1:])):
        raise UsageError("pyramid widths must be non-increasing")
    return prefix, widths


def _load_dataset(path):
    try:
        return load_csv(path)
    except OSError as exc:
        raise UsageError(f"cannot read data file {path}: {exc}") from None


def _load_matrix(path):
    try:
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError as exc:
        raise UsageError(f"cannot read matrix file {path}: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"matrix file {path} is not numeric CSV: {exc}") from None


def _load_vector(path, flag):
    try:
        vec = np.loadtxt(path, delimiter=",").ravel().astype(np.float64)
    except OSError as exc:
        raise UsageError(f"cannot read --{flag} file {path}: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"--{flag} file {path} is not numeric CSV: {exc}") from None
    if vec.size == 0 or not np.all(np.isfinite(vec)):
        raise UsageError(f"--{flag} file {path} must hold finite numbers")
    return vec


def _rmse(squared_errors):
    return float(np.sqrt(np.mean(squared_errors)))


# ---------------------------------------------------------------------------
# train
# ---------------------------------------------------------------------------


def _build_network(prefix, widths, regime, cfg):
    init_seed = derive_seed(cfg["seed"], _LANE_INIT)
    if prefix == "pyramid":
        return random_pyramid_network(widths, init_seed)
    plan = None
    if _REGIME_MAP[regime] == "dense_shots":
        noise = BitFlipNoise(cfg["noise"]) if cfg["noise"] > 0.0 else None
        plan = ShotPlan(
            cfg["shots"],
            derive_seed(cfg["seed"], _LANE_SHOTS),
            noise=noise,
            mitigation=cfg["mitigate"],
        )
    return random_dense_network(
        widths,
        init_seed,
        orthogonal=regime in ("svb", "stiefel"),
        plan=plan,
    )


def _cmd_train(cfg, provided):
    prefix, widths = _parse_arch(cfg["arch"])
    regime = cfg["regime"]
    if prefix == "pyramid" and regime != "pyramid":
        raise UsageError(
            f"a pyramid architecture requires --regime pyramid, got {regime!r}"
        )
    if prefix == "qnn" and regime == "pyramid":
        raise UsageError("--regime pyramid requires a pyramid:... architecture")
    if regime != "qnn-shots":
        for flag in ("shots", "noise", "mitigate"):
            if flag in provided:
                raise UsageError(f"--{flag} requires --regime qnn-shots")

    out_dir = _ensure_out(cfg)
    seed = cfg["seed"]
    data_path = cfg["data"] if cfg["data"] is not None else toy_dataset_path()
    ds = _load_dataset(data_path)
    print(f"loaded {ds.n_samples} samples, {ds.n_features} features")
    if cfg["balance"]:
        ds = balance_dataset(ds, derive_seed(seed, _LANE_BALANCE))
        print(f"balanced down to {ds.n_samples} samples")
    train_ds, test_ds = split_dataset(
        ds, _TEST_FRACTION, derive_seed(seed, _LANE_SPLIT)
    )
    if ds.n_features != widths[0]:
        if ds.n_features < widths[0]:
            raise UsageError(
                f"dataset has {ds.n_features} features but the architecture "
                f"expects {widths[0]}"
            )
        pca = fit_pca(train_ds, widths[0])
        train_ds = transform(pca, train_ds)
        test_ds = transform(pca, test_ds)
        print(f"fit PCA on the training split: {ds.n_features} -> {widths[0]}")

    net = _build_network(prefix, widths, regime, cfg)
    config = TrainConfig(
        learning_rate=cfg["lr"],
        epochs=cfg["epochs"],
        batch_size=cfg["batch"],
        seed=derive_seed(seed, _LANE_TRAIN),
    )
    history = train(net, train_ds, config, _REGIME_MAP[regime])

    train_metrics = evaluate(
        predict_scores(net, train_ds.features), train_ds.labels
    )
    test_metrics = evaluate(
        predict_scores(net, test_ds.features), test_ds.labels
    )
    save_network(net, str(out_dir / "model.txt"))
    (out_dir / "history.csv").write_text(history_to_csv(history))
    metrics = {
        "acc": test_metrics["acc"],
        "auc": test_metrics["auc"],
        "train": train_metrics,
        "test": test_metrics,
    }
    (out_dir / "metrics.json").write_text(json.dumps(metrics, indent=2) + "\n")
    (out_dir / "metrics.csv").write_text(metrics_to_csv(test_metrics))
    _write_manifest(out_dir, "train", cfg)
    print(
        f"test acc {test_metrics['acc']!r} auc {test_metrics['auc']!r} "
        f"({len(test_ds.labels)} held-out samples)"
    )
    print(f"wrote model.txt, history.csv, metrics, manifest to {out_dir}")


# ---------------------------------------------------------------------------
# bench-scaling
# ---------------------------------------------------------------------------


def _synthetic_dataset(n, m, seed):
    rng = np.random.default_rng(seed)
    feats = rng.standard_normal((m, n))
    direction = rng.standard_normal(n)
    labels = (feats @ direction > 0.0).astype(np.int64)
    return Dataset(feats, labels)


def _one_timed_epoch(n, trial, seed):
    ds = _synthetic_dataset(n, _BENCH_SAMPLES, derive_seed(seed, _LANE_BENCH, n))
    net = random_pyramid_network((n, n, 2), derive_seed(seed, _LANE_INIT, n, trial))
    config = TrainConfig(
        learning_rate=0.05,
        epochs=1,
        batch_size=16,
        seed=derive_seed(seed, _LANE_TRAIN, n, trial),
    )
    history = train(net, ds, config, "pyramid")
    return history.epochs[0].seconds


def _quadratic_fit(ns_values, seconds):
    ns_arr = np.asarray(ns_values, dtype=np.float64)
    y = np.asarray(seconds, dtype=np.float64)
    design = np.stack([ns_arr**2, ns_arr, np.ones_like(ns_arr)], axis=1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    residual = y - design @ coef
    ss_res = float(residual @ residual)
    centered = y - y.mean()
    ss_tot = float(centered @ centered)
    if ss_tot > 0.0:
        r_squared = 1.0 - ss_res / ss_tot
    else:
        r_squared = 1.0 if ss_res <= 1e-30 else 0.0
    return float(coef[0]), float(coef[1]), float(coef[2]), r_squared


def _cmd_bench_scaling(cfg, provided):
    n_list = _parse_int_list(cfg["n-list"], "n-list")
    if any(n < 2 for n in n_list):
        raise UsageError("--n-list widths must be >= 2")
    if cfg["trials"] < 1:
        raise UsageError("--trials must be >= 1")
    out_dir = _ensure_out(cfg)
    seed = cfg["seed"]

    # One throwaway epoch so JIT compilation never lands in a timing.
    _one_timed_epoch(min(n_list), cfg["trials"], seed)

    rows = []
    for n in n_list:
        params = num_angles(n, n) + num_angles(n, 2)
        for trial in range(cfg["trials"]):
            seconds = _one_timed_epoch(n, trial, seed)
            rows.append((n, params, seconds))
            print(f"n={n} trial={trial} {seconds:.4f}s")

    a, b, c, r_squared = _quadratic_fit(
        [r[0] for r in rows], [r[2] for r in rows]
    )
    lines = ["n,params,seconds_per_epoch"]
    lines.extend(f"{n},{p},{s!r}" for n, p, s in rows)
    (out_dir / "scaling.csv").write_text("\n".join(lines) + "\n")
    fit = {"a": a, "b": b, "c": c, "r_squared": r_squared}
    (out_dir / "fit.json").write_text(json.dumps(fit, indent=2) + "\n")
    _write_manifest(out_dir, "bench-scaling", cfg)
    print("a,b,c,r_squared")
    print(f"{a!r},{b!r},{c!r},{r_squared!r}")


# ---------------------------------------------------------------------------
# decompose
# ---------------------------------------------------------------------------


def _cmd_decompose(cfg, provided):
    matrix = _load_matrix(cfg["matrix"])
    layer = decompose(matrix, tol=1e-6)
    out_dir = _ensure_out(cfg)
    rebuilt = extract_matrix(layer)
    round_trip = float(np.max(np.abs(rebuilt - matrix)))
    branch = "-1" if layer.z_flip else "+1"
    angles = " ".join(repr(float(t)) for t in layer.thetas)
    (out_dir / "layer.txt").write_text(
        f"PYRAMID {layer.n_in} {layer.n_out} {int(layer.z_flip)}\n{angles}\n"
    )
    report = {
        "n": layer.n_in,
        "n_angles": int(layer.thetas.size),
        "z_flip": bool(layer.z_flip),
        "determinant_branch": branch,
        "round_trip_error": round_trip,
    }
    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    _write_manifest(out_dir, "decompose", cfg)
    print("n,n_angles,z_flip,determinant_branch,round_trip_error")
    print(
        f"{layer.n_in},{layer.thetas.size},{int(layer.z_flip)},"
        f"{branch},{round_trip!r}"
    )


# ---------------------------------------------------------------------------
# ip-demo
# ---------------------------------------------------------------------------


def _paired_squared_mse(xu, wu, target, shots, noise, seed):
    """Mean squared error of the squared-IP estimator over paired seeds,
    once with mitigation and once without, shot streams shared."""
    mitigated = []
    unmitigated = []
    for i in range(_SWEEP_REPEATS):
        pair_seed = derive_seed(seed, _LANE_PAIRED, i)
        for flag, sink in ((True, mitigated), (False, unmitigated)):
            plan = ShotPlan(shots, pair_seed, noise=noise, mitigation=flag)
            sink.append((square_ip_estimate(xu, wu, plan).value - target) ** 2)
    return {
        "mitigated": float(np.mean(mitigated)),
        "unmitigated": float(np.mean(unmitigated)),
    }


def _sweep_rows(xu, wu, exact, levels, noise, mitigate, seed):
    target_sq = exact**2
    rows = []
    for level in levels:
        signed_sq = []
        squared_sq = []
        mit_sq = []
        unmit_sq = []
        for i in range(_SWEEP_REPEATS):
            sub_seed = derive_seed(seed, _LANE_SWEEP, level, i)
            plan = ShotPlan(level, sub_seed, noise=noise, mitigation=mitigate)
            signed_sq.append(
                (signed_ip_estimate(xu, wu, plan).value - exact) ** 2
            )
            squared_sq.append(
                (square_ip_estimate(xu, wu, plan).value - target_sq) ** 2
            )
            if noise is not None:
                for flag, sink in ((True, mit_sq), (False, unmit_sq)):
                    sub = ShotPlan(level, sub_seed, noise=noise, mitigation=flag)
                    sink.append(
                        (square_ip_estimate(xu, wu, sub).value - target_sq) ** 2
                    )
        row = [level, _rmse(signed_sq), _rmse(squared_sq)]
        if noise is not None:
            row.extend([_rmse(mit_sq), _rmse(unmit_sq)])
        rows.append(row)
    return rows


def _cmd_ip_demo(cfg, provided):
    x_raw = _load_vector(cfg["x"], "x")
    w_raw = _load_vector(cfg["w"], "w")
    if x_raw.shape != w_raw.shape:
        raise DimensionMismatch(
            f"vectors disagree in length: {x_raw.size} vs {w_raw.size}"
        )
    norm_x = float(np.linalg.norm(x_raw))
    norm_w = float(np.linalg.norm(w_raw))
    if norm_x == 0.0:
        raise ZeroVector("--x is the zero vector")
    if norm_w == 0.0:
        raise ZeroVector("--w is the zero vector")
    xu = x_raw / norm_x
    wu = w_raw / norm_w
    exact = float(xu @ wu)

    out_dir = _ensure_out(cfg)
    seed = cfg["seed"]
    noise = BitFlipNoise(cfg["noise"]) if cfg["noise"] > 0.0 else None
    plan = ShotPlan(
        cfg["shots"],
        derive_seed(seed, _LANE_IP),
        noise=noise,
        mitigation=cfg["mitigate"],
    )
    squared = square_ip_estimate(xu, wu, plan)
    signed = signed_ip_estimate(xu, wu, plan)
    used = squared.n_used + signed.n_used
    total = squared.n_total + signed.n_total
    discard = 1.0 - used / total

    report = {
        "exact_dot": exact,
        "squared_estimate": squared.value,
        "signed_estimate": signed.value,
        "discard_fraction": discard,
        "norm_x": norm_x,
        "norm_w": norm_w,
        "shots": cfg["shots"],
        "noise_p_flip": cfg["noise"],
        "mitigation": cfg["mitigate"],
    }
    print("quantity,value")
    for key in (
        "exact_dot",
        "squared_estimate",
        "signed_estimate",
        "discard_fraction",
    ):
        print(f"{key},{report[key]!r}")

    if noise is not None:
        report["paired_squared_mse"] = _paired_squared_mse(
            xu, wu, exact**2, cfg["shots"], noise, seed
        )
        print(
            "paired_squared_mse_mitigated,"
            f"{report['paired_squared_mse']['mitigated']!r}"
        )
        print(
            "paired_squared_mse_unmitigated,"
            f"{report['paired_squared_mse']['unmitigated']!r}"
        )

    if cfg["sweep"] is not None:
        levels = _parse_int_list(cfg["sweep"], "sweep")
        if any(level < 1 for level in levels):
            raise UsageError("--sweep budgets must be >= 1")
        rows = _sweep_rows(
            xu, wu, exact, levels, noise, cfg["mitigate"], seed
        )
        header = "n_shots,rmse_signed,rmse_squared"
        if noise is not None:
            header += ",rmse_squared_mitigated,rmse_squared_unmitigated"
        lines = [header]
        for row in rows:
            lines.append(
                ",".join([str(row[0])] + [repr(v) for v in row[1:]])
            )
        (out_dir / "sweep.csv").write_text("\n".join(lines) + "\n")
        print(f"wrote {len(rows)}-level sweep to {out_dir / 'sweep.csv'}")

    (out_dir / "report.json").write_text(json.dumps(report, indent=2) + "\n")
    _write_manifest(out_dir, "ip-demo", cfg)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

_COMMANDS = {
    "train": (_TRAIN_FIELDS, ("arch", "regime", "out"), _cmd_train),
    "bench-scaling": (_BENCH_FIELDS, ("n-list", "out"), _cmd_bench_scaling),
    "decompose": (_DECOMPOSE_FIELDS, ("matrix", "out"), _cmd_decompose),
    "ip-demo": (_IP_FIELDS, ("x", "w", "out"), _cmd_ip_demo),
}


def _emit_error(exc):
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)


def main(argv=None):
    """Run one subcommand; returns the process exit code."""
    try:
        ns = _build_parser().parse_args(argv)
        if ns.command is None:
            raise UsageError(
                "missing command: train, bench-scaling, decompose, or ip-demo"
            )
        fields, required, handler = _COMMANDS[ns.command]
        cfg, provided = _resolve(ns, fields)
        for flag in required:
            if cfg[flag] is None:
                raise UsageError(f"missing required --{flag}")
        handler(cfg, provided)
        return 0
    except OrthoNNError as exc:
        _emit_error(exc)
        return 2 if isinstance(exc, _RUNTIME_ERRORS) else 1
    except Exception as exc:  # the CLI boundary reports, never raises
        _emit_error(exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
