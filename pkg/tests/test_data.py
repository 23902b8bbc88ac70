"""Oracle tests for orthonn.data.

CSV round-trips, PCA geometry, and the binary-classification metrics are
checked against hand-enumerated or brute-force oracles before anything
else in the package is allowed to depend on them.  Frozen values carry a
provenance tag: [TRIVIAL] direct consequence of the definition,
[DERIVED] computed through an independent oracle stated in the comment.
"""

import warnings

import numpy as np
import pytest

from orthonn.data import (
    Dataset,
    balance_dataset,
    evaluate,
    fit_pca,
    load_csv,
    metrics_to_csv,
    normalize_rows,
    save_csv,
    split_dataset,
    toy_dataset_path,
    transform,
)
from orthonn.errors import (
    DimensionMismatch,
    NonBinaryLabel,
    OrthoNNError,
    ParseError,
    RankDeficient,
    SingleClass,
)


def _write(tmp_path, text):
    path = tmp_path / "data.csv"
    path.write_text(text)
    return str(path)


# ---------------------------------------------------------------------------
# load_csv / save_csv
# ---------------------------------------------------------------------------


def test_load_csv_three_rows(tmp_path):
    # [TRIVIAL] 3-row file with labels 0,1,0 parses to m=3.
    path = _write(tmp_path, "f0,f1,label\n1.0,2.0,0\n3.0,4.0,1\n5.0,6.0,0\n")
    ds = load_csv(path)
    assert ds.features.shape == (3, 2)
    assert ds.labels.tolist() == [0, 1, 0]
    assert ds.names == ("f0", "f1")
    assert ds.features[2, 1] == 6.0


def test_load_csv_custom_label_column(tmp_path):
    # The label column may sit anywhere and carry any name.
    path = _write(tmp_path, "y,a,b\n1,0.5,0.25\n0,-1.0,2.0\n")
    ds = load_csv(path, label_column="y")
    assert ds.labels.tolist() == [1, 0]
    assert ds.names == ("a", "b")
    assert ds.features[1].tolist() == [-1.0, 2.0]


def test_inf_cell_is_a_parse_error_naming_the_row(tmp_path):
    # [TRIVIAL] non-finite cells are rejected with the 1-based data row.
    path = _write(tmp_path, "f0,f1,label\n1.0,2.0,0\ninf,4.0,1\n5.0,6.0,0\n")
    with pytest.raises(ParseError, match="row 2"):
        load_csv(path)


def test_nan_cell_rejected(tmp_path):
    path = _write(tmp_path, "f0,label\n1.0,0\nnan,1\n")
    with pytest.raises(ParseError, match="row 2"):
        load_csv(path)


def test_unparseable_cell_rejected(tmp_path):
    path = _write(tmp_path, "f0,label\n1.0,0\noops,1\n")
    with pytest.raises(ParseError, match="row 2"):
        load_csv(path)


def test_ragged_row_rejected(tmp_path):
    path = _write(tmp_path, "f0,f1,label\n1.0,2.0,0\n3.0,1\n")
    with pytest.raises(ParseError, match="row 2"):
        load_csv(path)


def test_missing_label_column_rejected(tmp_path):
    path = _write(tmp_path, "f0,f1\n1.0,2.0\n")
    with pytest.raises(ParseError, match="label"):
        load_csv(path)


def test_non_binary_label_rejected(tmp_path):
    path = _write(tmp_path, "f0,label\n1.0,0\n2.0,2\n")
    with pytest.raises(NonBinaryLabel):
        load_csv(path)


def test_fractional_label_rejected(tmp_path):
    path = _write(tmp_path, "f0,label\n1.0,0\n2.0,0.5\n")
    with pytest.raises(NonBinaryLabel):
        load_csv(path)


def test_round_trip_preserves_every_bit(tmp_path):
    # [DERIVED: 17 significant digits round-trip any float64 exactly]
    rng = np.random.default_rng(7)
    feats = rng.standard_normal((23, 5)) * 10.0 ** rng.integers(-8, 8, (23, 5))
    labels = rng.integers(0, 2, 23)
    ds = Dataset(feats, labels, names=("a", "b", "c", "d", "e"))
    path = str(tmp_path / "round.csv")
    save_csv(ds, path)
    back = load_csv(path)
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.labels, ds.labels)
    assert back.names == ds.names


def test_dataset_validation():
    with pytest.raises(OrthoNNError):
        Dataset(np.zeros((1, 3)), np.zeros(1, dtype=int))  # m < 2
    with pytest.raises(OrthoNNError):
        Dataset(np.full((3, 2), np.nan), np.zeros(3, dtype=int))
    with pytest.raises(DimensionMismatch):
        Dataset(np.zeros((3, 2)), np.zeros(4, dtype=int))
    with pytest.raises(NonBinaryLabel):
        Dataset(np.zeros((3, 2)), np.array([0, 1, 2]))


# ---------------------------------------------------------------------------
# PCA
# ---------------------------------------------------------------------------


def test_centered_full_rank_transform_is_isometry():
    # [TRIVIAL: orthonormal basis change] pairwise distances survive a
    # full-rank PCA of already-centered data.
    rng = np.random.default_rng(11)
    feats = rng.standard_normal((30, 4))
    feats -= feats.mean(axis=0)
    ds = Dataset(feats, rng.integers(0, 2, 30))
    model = fit_pca(ds, 4)
    out = transform(model, ds)
    before = np.linalg.norm(feats[:, None, :] - feats[None, :, :], axis=2)
    after = np.linalg.norm(
        out.features[:, None, :] - out.features[None, :, :], axis=2
    )
    assert np.max(np.abs(before - after)) < 1e-8


def test_rank_one_explained_variance_ratio():
    # [DERIVED: constructed rank-1 matrix] all variance sits on one axis.
    rng = np.random.default_rng(3)
    direction = rng.standard_normal(6)
    direction /= np.linalg.norm(direction)
    feats = np.outer(rng.standard_normal(25), direction) + 0.7
    ds = Dataset(feats, rng.integers(0, 2, 25))
    with pytest.warns(RankDeficient):
        model = fit_pca(ds, 6)
    ratio = model.explained_variance[0] / model.explained_variance.sum()
    assert ratio == pytest.approx(1.0, abs=1e-10)


def test_full_basis_reconstruction():
    # [TRIVIAL: full basis] k = d reconstructs the data.
    rng = np.random.default_rng(5)
    feats = rng.standard_normal((40, 6)) * 3.0 + 1.5
    ds = Dataset(feats, rng.integers(0, 2, 40))
    model = fit_pca(ds, 6)
    out = transform(model, ds)
    rebuilt = out.features @ model.components + model.mean
    assert np.max(np.abs(rebuilt - feats)) < 1e-8


def test_components_orthonormal_and_variances_sorted():
    rng = np.random.default_rng(17)
    for m, d, k in ((12, 5, 3), (40, 8, 8), (9, 4, 2)):
        ds = Dataset(rng.standard_normal((m, d)), rng.integers(0, 2, m))
        model = fit_pca(ds, k)
        gram = model.components @ model.components.T
        assert np.max(np.abs(gram - np.eye(k))) < 1e-10
        ev = model.explained_variance
        assert ev.shape == (k,)
        assert np.all(np.diff(ev) <= 1e-12)
        assert np.all(ev >= 0.0)


def test_rank_deficient_warning_only_when_rank_is_short():
    rng = np.random.default_rng(23)
    base = rng.standard_normal((20, 3))
    feats = base @ rng.standard_normal((3, 5))  # rank 3 in dimension 5
    ds = Dataset(feats, rng.integers(0, 2, 20))
    with pytest.warns(RankDeficient):
        fit_pca(ds, 5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        fit_pca(ds, 3)  # enough rank: must not warn


def test_pca_k_validation():
    rng = np.random.default_rng(2)
    ds = Dataset(rng.standard_normal((5, 4)), rng.integers(0, 2, 5))
    with pytest.raises(OrthoNNError):
        fit_pca(ds, 0)
    with pytest.raises(OrthoNNError):
        fit_pca(ds, 5)  # k > min(m, d)


def test_transform_dimension_mismatch():
    rng = np.random.default_rng(4)
    ds = Dataset(rng.standard_normal((10, 4)), rng.integers(0, 2, 10))
    model = fit_pca(ds, 2)
    other = Dataset(rng.standard_normal((6, 3)), rng.integers(0, 2, 6))
    with pytest.raises(DimensionMismatch):
        transform(model, other)


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def test_perfect_separation():
    # [TRIVIAL]
    metrics = evaluate(np.array([0.1, 0.2, 0.8, 0.9]), np.array([0, 0, 1, 1]))
    assert metrics["acc"] == 1.0
    assert metrics["auc"] == 1.0


def test_flipped_scores():
    # [TRIVIAL] scores anti-correlated with labels.
    metrics = evaluate(np.array([0.9, 0.8, 0.2, 0.1]), np.array([0, 0, 1, 1]))
    assert metrics["auc"] == 0.0


def test_frozen_auc_quadruple():
    # [DERIVED: enumerate the 4 pos/neg pairs] scores (0.1,0.4,0.35,0.8)
    # with labels (0,0,1,1): the positive scores are 0.35 and 0.8.
    #   0.35 > 0.1 win, 0.35 < 0.4 loss, 0.8 > 0.1 win, 0.8 > 0.4 win
    # giving 3 wins out of 4 pairs.
    metrics = evaluate(
        np.array([0.1, 0.4, 0.35, 0.8]), np.array([0, 0, 1, 1])
    )
    assert metrics["auc"] == 0.75


def _brute_force_auc(scores, labels):
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


def test_auc_matches_brute_force_with_ties():
    # [DERIVED: exhaustive pairwise oracle] scores drawn from a coarse
    # grid so ties occur, both within and across classes.
    rng = np.random.default_rng(31)
    grid = np.linspace(0.0, 1.0, 7)
    for _ in range(20):
        m = int(rng.integers(4, 51))
        labels = np.zeros(m, dtype=int)
        labels[: int(rng.integers(1, m))] = 1
        rng.shuffle(labels)
        if labels.min() == labels.max():
            labels[0] = 1 - labels[0]
        scores = rng.choice(grid, m)
        metrics = evaluate(scores, labels)
        want = _brute_force_auc(scores, labels)
        assert metrics["auc"] == pytest.approx(want, abs=1e-12)


def test_half_score_counts_as_positive_prediction():
    metrics = evaluate(np.array([0.5, 0.2]), np.array([1, 0]))
    assert metrics["acc"] == 1.0
    assert metrics["confusion"] == {"tn": 1, "fp": 0, "fn": 0, "tp": 1}


def test_confusion_matrix_fields():
    # [TRIVIAL] hand-tallied 8-sample case.
    scores = np.array([0.9, 0.1, 0.6, 0.4, 0.7, 0.2, 0.8, 0.3])
    labels = np.array([1, 0, 0, 1, 1, 1, 0, 0])
    metrics = evaluate(scores, labels)
    # predictions: 1,0,1,0,1,0,1,0
    assert metrics["confusion"] == {"tn": 2, "fp": 2, "fn": 2, "tp": 2}
    assert metrics["acc"] == 0.5
    assert all(isinstance(v, int) for v in metrics["confusion"].values())
    assert sum(metrics["confusion"].values()) == 8


def test_single_class_raises():
    with pytest.raises(SingleClass):
        evaluate(np.array([0.1, 0.9]), np.array([1, 1]))


def test_evaluate_validates_score_range():
    with pytest.raises(OrthoNNError):
        evaluate(np.array([1.2, 0.4]), np.array([1, 0]))


def test_metrics_to_csv_frozen():
    # [TRIVIAL] header plus one row, confusion flattened as tn,fp,fn,tp.
    # Predictions at threshold 0.5 are (0,0,0,1) for labels (0,0,1,1):
    # two true negatives, one false negative, one true positive.
    metrics = evaluate(
        np.array([0.1, 0.4, 0.35, 0.8]), np.array([0, 0, 1, 1])
    )
    text = metrics_to_csv(metrics)
    assert text == "acc,auc,tn,fp,fn,tp\n0.75,0.75,2,0,1,1\n"


# ---------------------------------------------------------------------------
# normalization, split, balance
# ---------------------------------------------------------------------------


def test_normalize_rows():
    feats = np.array([[3.0, 4.0], [0.0, 0.0], [1.0, 0.0]])
    unit, norms = normalize_rows(feats)
    assert norms.tolist() == [5.0, 0.0, 1.0]
    assert np.allclose(unit[0], [0.6, 0.8])
    assert np.array_equal(unit[1], [0.0, 0.0])  # zero rows stay zero
    rebuilt = unit * norms[:, None]
    assert np.allclose(rebuilt, feats)


def test_split_deterministic_and_disjoint():
    rng = np.random.default_rng(41)
    feats = rng.standard_normal((40, 3))
    labels = np.array([0] * 30 + [1] * 10)
    ds = Dataset(feats, labels)
    train_a, test_a = split_dataset(ds, 0.25, seed=9)
    train_b, test_b = split_dataset(ds, 0.25, seed=9)
    assert np.array_equal(train_a.features, train_b.features)
    assert np.array_equal(test_a.features, test_b.features)
    assert train_a.features.shape[0] + test_a.features.shape[0] == 40
    # every original row lands in exactly one side
    stacked = np.vstack((train_a.features, test_a.features))
    assert np.array_equal(
        np.sort(stacked.view("f8,f8,f8"), axis=0),
        np.sort(feats.view("f8,f8,f8"), axis=0),
    )
    # stratified: both classes present on both sides
    assert 0 < train_a.labels.mean() < 1
    assert 0 < test_a.labels.mean() < 1
    _, test_c = split_dataset(ds, 0.25, seed=10)
    assert not np.array_equal(test_a.features, test_c.features)


def test_split_validation():
    rng = np.random.default_rng(1)
    ds = Dataset(rng.standard_normal((10, 2)), np.array([0, 1] * 5))
    with pytest.raises(OrthoNNError):
        split_dataset(ds, 0.0, seed=1)
    with pytest.raises(OrthoNNError):
        split_dataset(ds, 1.0, seed=1)


def test_balance_undersamples_majority():
    rng = np.random.default_rng(43)
    feats = rng.standard_normal((40, 2))
    labels = np.array([0] * 30 + [1] * 10)
    ds = Dataset(feats, labels)
    bal_a = balance_dataset(ds, seed=3)
    bal_b = balance_dataset(ds, seed=3)
    assert bal_a.labels.sum() == 10
    assert (bal_a.labels == 0).sum() == 10
    assert np.array_equal(bal_a.features, bal_b.features)
    # every balanced row is one of the original rows
    originals = {tuple(row) for row in feats}
    assert all(tuple(row) in originals for row in bal_a.features)


# ---------------------------------------------------------------------------
# bundled toy dataset
# ---------------------------------------------------------------------------


def test_bundled_toy_dataset_loads_and_is_separable():
    ds = load_csv(toy_dataset_path())
    assert ds.features.shape == (500, 4)
    assert (ds.labels == 0).sum() == 250
    assert (ds.labels == 1).sum() == 250
    assert np.all(np.isfinite(ds.features))
    assert np.all(np.linalg.norm(ds.features, axis=1) > 1e-6)
    # a linear rule through the origin separates nearly everything
    direction = (
        ds.features[ds.labels == 1].mean(axis=0)
        - ds.features[ds.labels == 0].mean(axis=0)
    )
    predicted = (ds.features @ direction >= 0.0).astype(int)
    assert (predicted == ds.labels).mean() >= 0.99
