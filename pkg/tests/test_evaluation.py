import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairsfs.evaluation import (
    EvaluationError,
    cross_validate,
    knn_predict,
    knn_train,
    lr_loss_grad,
    lr_train,
    make_folds,
    nb_log_posterior,
    nb_train,
    one_hot,
    read_report,
    train,
    write_report,
)
from fairsfs.oracle import fair_feature_set, markov_blanket, sample

from conftest import table_from_columns


# -- folds -------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(20, 400), st.integers(2, 10), st.integers(0, 1000))
def test_folds_partition_and_stratify(n, k, seed):
    y = np.random.default_rng(seed).integers(0, 2, n)
    plan = make_folds(y, k, seed)
    sizes = np.bincount(plan.assignments, minlength=k)
    assert sizes.sum() == n and sizes.max() - sizes.min() <= 1
    for c in (0, 1):
        per = np.bincount(plan.assignments[y == c], minlength=k)
        assert per.max() - per.min() <= 1
    assert np.array_equal(plan.assignments, make_folds(y, k, seed).assignments)


def test_folds_reject_bad_k():
    with pytest.raises(EvaluationError):
        make_folds([0, 1, 0], 5)


# -- naive Bayes ---------------------------------------------------------------

def test_nb_hand_computation():
    rows = np.array([[0, 1], [1, 1], [0, 0], [1, 0], [0, 1]])
    y = np.array([1, 1, 0, 0, 1])
    m = nb_train(rows, y, [2, 2])
    # smoothed factors by hand: P(y=1)=3/5
    # P(f0=0|1)=(2+1)/(3+2), P(f1=1|1)=(3+1)/(3+2); P(f0=0|0)=(1+1)/(2+2), P(f1=1|0)=(0+1)/(2+2)
    post1 = (3 / 5) * (3 / 5) * (4 / 5)
    post0 = (2 / 5) * (2 / 4) * (1 / 4)
    lp = nb_log_posterior(m, np.array([[0, 1]]))[0]
    assert lp[1] == pytest.approx(math.log(post1))
    assert lp[0] == pytest.approx(math.log(post0))
    for t in m.params["tables"]:
        assert np.allclose(t.sum(axis=1), 1.0)


def test_nb_perfect_feature():
    x = np.array([0, 1] * 50)
    assert np.array_equal(train("nb", x[:, None], x, [2]).predict(x[:, None]), x)


def test_nb_no_features_predicts_majority():
    y = np.array([1, 1, 1, 0, 0])
    m = train("nb", np.zeros((5, 0), dtype=int), y, [])
    assert m.predict(np.zeros((3, 0), dtype=int)).tolist() == [1, 1, 1]


def test_nb_tie_goes_to_zero():
    m = train("nb", np.array([[0], [0]]), np.array([0, 1]), [2])
    assert m.predict(np.array([[0], [1]])).tolist() == [0, 0]


# -- logistic regression -------------------------------------------------------

def test_lr_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    X = one_hot(rng.integers(0, 3, (60, 4)), [3, 3, 3, 3])
    y = rng.integers(0, 2, 60).astype(float)
    h = 1e-5
    for _ in range(10):
        w, b = rng.normal(size=X.shape[1]), float(rng.normal())
        _, gw, gb = lr_loss_grad(w, b, X, y, 1e-4)
        num = np.empty_like(w)
        for i in range(len(w)):
            e = np.zeros_like(w)
            e[i] = h
            num[i] = (lr_loss_grad(w + e, b, X, y, 1e-4)[0] - lr_loss_grad(w - e, b, X, y, 1e-4)[0]) / (2 * h)
        num_b = (lr_loss_grad(w, b + h, X, y, 1e-4)[0] - lr_loss_grad(w, b - h, X, y, 1e-4)[0]) / (2 * h)
        assert np.max(np.abs(num - gw)) <= 1e-6
        assert abs(num_b - gb) <= 1e-6


def test_lr_separable():
    rows = np.array([[0, 0], [0, 1], [1, 0], [1, 1]] * 10)
    y = rows[:, 0]
    m = lr_train(rows, y, [2, 2])
    assert np.array_equal(m.predict(rows), y)


def test_lr_zero_init_ties_to_class_zero():
    rows = np.array([[0], [1], [0], [1]])
    m = lr_train(rows, np.array([0, 1, 1, 0]), [2], epochs=0)
    assert m.predict(rows).tolist() == [0, 0, 0, 0]


def test_lr_divergence_reported():
    rows = np.array([[0], [1]] * 5)
    with pytest.raises(EvaluationError, match="diverged"):
        lr_train(rows, rows[:, 0], [2], epochs=50, rate=1e308)


# -- k nearest neighbours ------------------------------------------------------

def test_knn_query_equal_to_training_row():
    rows = np.array([[0, 1, 2], [2, 1, 0], [1, 1, 1]])
    labels = np.array([1, 0, 1])
    assert knn_predict(rows, labels, rows, k=1).tolist() == [1, 0, 1]


def test_knn_k_equals_n_majority():
    rng = np.random.default_rng(1)
    rows = rng.integers(0, 3, (10, 3))
    labels = np.array([1] * 6 + [0] * 4)
    assert set(knn_predict(rows, labels, rng.integers(0, 3, (20, 3)), k=10)) == {1}


def test_knn_errors():
    with pytest.raises(EvaluationError):
        knn_train(np.zeros((0, 2)), [], 1)
    with pytest.raises(EvaluationError):
        knn_predict(np.zeros((3, 1)), [0, 1, 0], [[0]], k=4)


# -- cross-validation ----------------------------------------------------------

def _table(seed=0, n=600):
    rng = np.random.default_rng(seed)
    s = rng.integers(0, 2, n)
    a = rng.integers(0, 3, n)
    c = np.where(rng.random(n) < 0.8, s, rng.integers(0, 2, n))
    y = np.where(rng.random(n) < 0.7, (a > 0).astype(int), c)
    return table_from_columns({"s": s, "a": a, "c": c, "y": y}, "s", "y")


def test_cv_constant_predictor():
    t = _table()
    rep = cross_validate(t, [], "nb")
    y = t.column(3)
    assert rep.mean["spd"] == 0.0
    assert rep.mean["acc"] == pytest.approx(max(y.mean(), 1 - y.mean()), abs=0.02)


@pytest.mark.parametrize("kind", ["nb", "lr", "knn"])
def test_cv_deterministic(kind):
    t = _table(1)
    a = list(cross_validate(t, [1, 2], kind, seed=3).records())
    b = list(cross_validate(t, [1, 2], kind, seed=3).records())
    assert a == b and len(a) == 11


def test_cv_report_round_trip(tmp_path):
    rep = cross_validate(_table(2), [1], "lr")
    write_report(tmp_path / "r.jsonl", rep)
    recs = read_report(tmp_path / "r.jsonl")
    assert recs[-1]["fold"] == "mean" and recs[-1]["features"] == ["a"]
    assert recs[-1]["acc"] == pytest.approx(rep.mean["acc"])


def test_cv_per_fold_selection():
    t = _table(3)
    seen = []
    rep = cross_validate(t, [1], "nb", select=lambda tr: seen.append(tr.n_rows) or [1])
    assert len(seen) == 10 and all(n < t.n_rows for n in seen)
    assert rep.features == ["a"]


def test_cv_unknown_classifier():
    with pytest.raises(EvaluationError):
        cross_validate(_table(), [1], "svm")


def test_fair_set_lowers_spd(kfair_net):
    t = sample(kfair_net, 20000, seed=0)
    fair = sorted(fair_feature_set(kfair_net, "T", "S"))
    full = sorted(markov_blanket(kfair_net, kfair_net.index("T")))
    a = cross_validate(t, fair, "nb").mean["spd"]
    b = cross_validate(t, full, "nb").mean["spd"]
    assert a < b
