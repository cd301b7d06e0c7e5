"""Accuracy and group-fairness metrics for binary predictions."""

import logging
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

log = logging.getLogger(__name__)


class MetricError(ValueError):
    pass


def _vectors(*arrays):
    arrays = [np.asarray(a).reshape(-1) for a in arrays]
    n = len(arrays[0])
    if any(len(a) != n for a in arrays):
        raise MetricError("input vectors differ in length")
    if n == 0:
        raise MetricError("empty input")
    return arrays


def accuracy(pred, truth):
    pred, truth = _vectors(pred, truth)
    return float(np.mean(pred == truth))


def group_rates(pred, sensitive, groups=None):
    """Positive-prediction rate of each non-empty sensitive group."""
    pred, sensitive = _vectors(pred, sensitive)
    if groups is None:
        groups = np.unique(sensitive)
    rates = {}
    for g in groups:
        mask = sensitive == g
        if not mask.any():
            log.warning("sensitive group %r has no members; skipped", g)
            continue
        rates[g.item() if hasattr(g, "item") else g] = float(np.mean(pred[mask] == 1))
    return rates


def spd(pred, sensitive, groups=None):
    """Statistical parity difference.

    For two groups this is the absolute gap in positive-prediction rates;
    with more groups it is the largest pairwise gap.
    """
    rates = group_rates(pred, sensitive, groups)
    if len(rates) < 2:
        raise MetricError("statistical parity needs at least two non-empty groups")
    return max(abs(a - b) for a, b in combinations(rates.values(), 2))


def predictive_equality(pred, truth, sensitive, positive_group=1):
    """Absolute false-positive-rate gap between ``positive_group`` and the rest.

    Returns ``None`` when either side has no actual negatives.
    """
    pred, truth, sensitive = _vectors(pred, truth, sensitive)
    neg = truth == 0
    inside = sensitive == positive_group
    a, b = neg & inside, neg & ~inside
    if not a.any() or not b.any():
        return None
    return float(abs(np.mean(pred[a] == 1) - np.mean(pred[b] == 1)))


@dataclass
class FairnessReport:
    acc: float
    spd: float
    pe: float | None
    n: int
    group_stats: dict = field(default_factory=dict)

    def __post_init__(self):
        for name in ("acc", "spd", "pe"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise MetricError(f"{name}={v} outside [0, 1]")

    def to_dict(self):
        return {
            "acc": self.acc,
            "spd": self.spd,
            "pe": self.pe,
            "n": self.n,
            "group_stats": {str(k): v for k, v in self.group_stats.items()},
        }


def fairness_report(pred, truth, sensitive, positive_group=1):
    pred, truth, sensitive = _vectors(pred, truth, sensitive)
    stats = {}
    for g in np.unique(sensitive):
        m = sensitive == g
        stats[int(g)] = {
            "n": int(m.sum()),
            "predicted_positive": int(np.sum(pred[m] == 1)),
            "false_positive": int(np.sum((pred[m] == 1) & (truth[m] == 0))),
            "actual_negative": int(np.sum(truth[m] == 0)),
        }
    return FairnessReport(
        accuracy(pred, truth),
        spd(pred, sensitive),
        predictive_equality(pred, truth, sensitive, positive_group),
        len(pred),
        stats,
    )
