"""Classifiers and stratified cross-validation producing fairness reports."""

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .metrics import fairness_report

CLASSIFIERS = ("nb", "lr", "knn")


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def split(self, fold):
        test = np.flatnonzero(self.assignments == fold)
        train = np.flatnonzero(self.assignments != fold)
        return train, test


def make_folds(labels, k=10, seed=0):
    """Stratified fold assignment with fold sizes differing by at most one."""
    labels = np.asarray(labels)
    if k < 2 or k > len(labels):
        raise EvaluationError(f"cannot split {len(labels)} rows into {k} folds")
    rng = np.random.default_rng(seed)
    order = np.concatenate([rng.permutation(np.flatnonzero(labels == c)) for c in np.unique(labels)])
    assignments = np.empty(len(labels), dtype=np.int64)
    assignments[order] = np.arange(len(labels)) % k
    return FoldPlan(k, assignments, seed)


def _as_2d(rows, d):
    """``(m, d)`` code matrix; a 1-D input of length ``d`` is a single row."""
    rows = np.asarray(rows, dtype=np.int64)
    if rows.ndim == 2:
        if rows.shape[1] != d:
            raise EvaluationError(f"expected {d} feature columns, got {rows.shape[1]}")
        return rows
    if rows.size == d:
        return rows.reshape(1, d)
    if d == 1:
        return rows.reshape(-1, 1)
    raise EvaluationError(f"cannot read rows of {d} features from shape {rows.shape}")


@dataclass
class TrainedModel:
    kind: str
    features: tuple
    params: dict = field(default_factory=dict)

    def predict(self, rows):
        return PREDICT[self.kind](self, rows)


# -- naive Bayes ------------------------------------------------------------

def nb_train(rows, target, cards, smoothing=1.0):
    """Categorical naive Bayes. ``rows`` is ``(n, d)`` integer codes."""
    rows = _as_2d(rows, len(cards))
    target = np.asarray(target, dtype=np.int64)
    if len(rows) != len(target):
        raise EvaluationError("rows and target differ in length")
    counts = np.bincount(target, minlength=2).astype(np.float64)
    tables = []
    for j, card in enumerate(cards):
        t = np.zeros((2, card))
        np.add.at(t, (target, rows[:, j]), 1.0)
        t += smoothing
        tables.append(t / t.sum(axis=1, keepdims=True))
    return TrainedModel("nb", tuple(range(len(cards))), {"prior": counts / counts.sum(), "tables": tables})


def nb_log_posterior(model, rows):
    rows = _as_2d(rows, len(model.params["tables"]))
    with np.errstate(divide="ignore"):
        logp = np.tile(np.log(model.params["prior"]), (len(rows), 1))
    for j, t in enumerate(model.params["tables"]):
        logp += np.log(t[:, rows[:, j]]).T
    return logp


def nb_predict(model, rows):
    logp = nb_log_posterior(model, rows)
    return (logp[:, 1] > logp[:, 0]).astype(np.int64)


# -- logistic regression ----------------------------------------------------

def one_hot(rows, cards):
    rows = _as_2d(rows, len(cards))
    out = np.zeros((len(rows), int(sum(cards))))
    offset = 0
    for j, card in enumerate(cards):
        out[np.arange(len(rows)), offset + rows[:, j]] = 1.0
        offset += card
    return out


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def lr_loss_grad(w, b, X, y, l2):
    """Mean log-loss plus ``l2/2 * |w|^2`` and its gradient in ``(w, b)``."""
    # overflow surfaces as a non-finite loss, which lr_train reports
    with np.errstate(over="ignore", invalid="ignore"):
        z = X @ w + b
        # log(1 + exp(z)) - y z, computed stably
        loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))
        r = _sigmoid(z) - y
        gw = X.T @ r / len(y) + l2 * w
        gb = float(np.mean(r))
    return loss, gw, gb


def lr_train(rows, target, cards, epochs=500, rate=0.1, l2=1e-4):
    X = one_hot(rows, cards)
    y = np.asarray(target, dtype=np.float64)
    w = np.zeros(X.shape[1])
    b = 0.0
    loss = None
    for epoch in range(epochs):
        loss, gw, gb = lr_loss_grad(w, b, X, y, l2)
        if not np.isfinite(loss):
            raise EvaluationError(
                f"logistic regression diverged at epoch {epoch}: loss={loss}, "
                f"|w|={np.linalg.norm(w):.3g}, b={b:.3g}, rate={rate}"
            )
        w -= rate * gw
        b -= rate * gb
    return TrainedModel("lr", tuple(range(len(cards))), {"w": w, "b": b, "cards": tuple(cards), "loss": loss})


def lr_proba(model, rows):
    X = one_hot(rows, model.params["cards"])
    return _sigmoid(X @ model.params["w"] + model.params["b"])


def lr_predict(model, rows):
    return (lr_proba(model, rows) > 0.5).astype(np.int64)


# -- k nearest neighbours ---------------------------------------------------

def knn_train(rows, target, k=5):
    rows = np.asarray(rows, dtype=np.int64)
    if rows.ndim == 1:
        rows = rows.reshape(-1, 1)
    if len(rows) == 0:
        raise EvaluationError("k-NN needs at least one training row")
    if k > len(rows):
        raise EvaluationError(f"k={k} exceeds the {len(rows)} training rows")
    return TrainedModel("knn", tuple(range(rows.shape[1])),
                        {"rows": rows, "labels": np.asarray(target, dtype=np.int64), "k": k})


def knn_predict(train_rows, labels, rows, k=5):
    """Hamming-distance majority vote; see :func:`fairsfs.kernels.knn_predict`."""
    train_rows = np.asarray(train_rows, dtype=np.int64)
    if len(train_rows) == 0:
        raise EvaluationError("k-NN needs at least one training row")
    if train_rows.ndim == 1:
        train_rows = train_rows.reshape(-1, 1)
    if k > len(train_rows):
        raise EvaluationError(f"k={k} exceeds the {len(train_rows)} training rows")
    rows = _as_2d(rows, train_rows.shape[1])
    return kernels.knn_predict(train_rows, labels, rows, k)


PREDICT = {
    "nb": nb_predict,
    "lr": lr_predict,
    "knn": lambda m, rows: knn_predict(m.params["rows"], m.params["labels"], rows, m.params["k"]),
}


def train(kind, rows, target, cards, options=None):
    options = options or {}
    if kind == "nb":
        return nb_train(rows, target, cards, options.get("smoothing", 1.0))
    if kind == "lr":
        return lr_train(rows, target, cards, options.get("epochs", 500),
                        options.get("rate", 0.1), options.get("l2", 1e-4))
    if kind == "knn":
        return knn_train(rows, target, options.get("k", 5))
    raise EvaluationError(f"unknown classifier {kind!r}; choose from {CLASSIFIERS}")


# -- cross-validation -------------------------------------------------------

def default_positive_group(table):
    """Code of the alphabetically first sensitive label."""
    labels = table.metas[table.sensitive_index].labels
    return labels.index(min(labels))


@dataclass
class CVReport:
    classifier: str
    features: list
    folds: list
    mean: dict

    def records(self):
        for i, rep in enumerate(self.folds):
            yield {"fold": i, **rep.to_dict()}
        yield {"fold": "mean", "classifier": self.classifier, "features": self.features, **self.mean}


def _mean(values):
    vals = [v for v in values if v is not None]
    return float(np.mean(vals)) if vals else None


def cross_validate(table, features, kind, folds=10, seed=0, positive_group=None,
                   options=None, select=None):
    """Stratified k-fold evaluation of one classifier on a feature subset.

    ``features`` are column indices. With ``select`` (a callable taking the
    training-fold table and returning column indices) features are chosen
    inside every fold instead.
    """
    s, t = table.sensitive_index, table.target_index
    if s is None or t is None:
        raise EvaluationError("table needs sensitive and target columns")
    if kind not in CLASSIFIERS:
        raise EvaluationError(f"unknown classifier {kind!r}; choose from {CLASSIFIERS}")
    if positive_group is None:
        positive_group = default_positive_group(table)
    y = table.column(t)
    plan = make_folds(y, folds, seed)
    reports = []
    for f in range(plan.k):
        tr, te = plan.split(f)
        if len(np.unique(y[tr])) < 2:
            raise EvaluationError(f"fold {f}: training split holds a single class")
        feats = list(features) if select is None else list(select(table.take_rows(tr)))
        cards = [table.metas[j].cardinality for j in feats]
        X = table.codes[feats].T if feats else np.zeros((table.n_rows, 0), dtype=np.int64)
        model = train(kind, X[tr], y[tr], cards, options)
        pred = model.predict(X[te])
        reports.append(fairness_report(pred, y[te], table.column(s)[te], positive_group))
    mean = {
        "acc": _mean(r.acc for r in reports),
        "spd": _mean(r.spd for r in reports),
        "pe": _mean(r.pe for r in reports),
        "pe_folds_missing": sum(r.pe is None for r in reports),
    }
    return CVReport(kind, [table.names[j] for j in features], reports, mean)


def write_report(path, report):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in report.records():
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_report(path):
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]
