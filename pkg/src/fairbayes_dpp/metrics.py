"""Accuracy, cost-sensitive risk, predictive-parity disparity and the paired t-test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import DegenerateTestError, ShapeError
from .special import t_cdf


@dataclass
class EvalReport:
    accuracy: float
    cost_risk: float
    dpp: float
    group_ppv: dict
    overall_ppv: float | None
    counts: dict
    n: int
    cost: float
    # groups left out of the DPP sum because they had no positive prediction
    groups_without_positives: list = field(default_factory=list)
    no_positive_predictions: bool = False

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "cost_risk": self.cost_risk,
            "dpp": self.dpp,
            "group_ppv": {str(a): v for a, v in self.group_ppv.items()},
            "overall_ppv": self.overall_ppv,
            "counts": {str(a): list(v) for a, v in self.counts.items()},
            "n": self.n,
            "cost": self.cost,
            "groups_without_positives": list(self.groups_without_positives),
            "no_positive_predictions": self.no_positive_predictions,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvalReport":
        return cls(
            accuracy=d["accuracy"], cost_risk=d["cost_risk"], dpp=d["dpp"],
            group_ppv={int(a): v for a, v in d["group_ppv"].items()},
            overall_ppv=d["overall_ppv"],
            counts={int(a): tuple(v) for a, v in d["counts"].items()},
            n=d["n"], cost=d["cost"],
            groups_without_positives=list(d["groups_without_positives"]),
            no_positive_predictions=d["no_positive_predictions"],
        )


def evaluate(preds, labels, groups, c: float) -> EvalReport:
    """Score binary predictions against labels, per group and pooled.

    ``counts[a]`` is (TP, FP, TN, FN).  Groups with no positive prediction
    have an undefined PPV; they are skipped in the DPP sum and listed in
    ``groups_without_positives``.
    """
    preds = np.asarray(preds).astype(np.int64)
    labels = np.asarray(labels).astype(np.int64)
    groups = np.asarray(groups).astype(np.int64)
    if not (preds.shape == labels.shape == groups.shape) or preds.ndim != 1:
        raise ShapeError("preds, labels and groups must be 1-d sequences of equal length")
    n = preds.size
    if n == 0:
        raise ShapeError("cannot evaluate an empty prediction set")

    counts, group_ppv, skipped = {}, {}, []
    for a in np.unique(groups).tolist():
        m = groups == a
        p, y = preds[m], labels[m]
        tp = int(np.sum((p == 1) & (y == 1)))
        fp = int(np.sum((p == 1) & (y == 0)))
        tn = int(np.sum((p == 0) & (y == 0)))
        fn = int(np.sum((p == 0) & (y == 1)))
        counts[a] = (tp, fp, tn, fn)
        if tp + fp > 0:
            group_ppv[a] = tp / (tp + fp)
        else:
            skipped.append(a)

    tp = sum(v[0] for v in counts.values())
    fp = sum(v[1] for v in counts.values())
    tn = sum(v[2] for v in counts.values())
    fn = sum(v[3] for v in counts.values())
    overall = tp / (tp + fp) if tp + fp > 0 else None
    dpp = 0.0 if overall is None else float(sum(abs(v - overall) for v in group_ppv.values()))
    return EvalReport(
        accuracy=(tp + tn) / n,
        cost_risk=(c * fp + (1.0 - c) * fn) / n,
        dpp=dpp,
        group_ppv=group_ppv,
        overall_ppv=overall,
        counts=counts,
        n=n,
        cost=c,
        groups_without_positives=skipped,
        no_positive_predictions=overall is None,
    )


def paired_t_one_sided(d_fair, d_base) -> tuple[float, float]:
    """Paired t-test of H0: equal means against H1: mean(d_fair) < mean(d_base).

    Returns (t statistic, lower-tail p-value).
    """
    a = np.asarray(d_fair, dtype=float)
    b = np.asarray(d_base, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError("paired samples must be 1-d and of equal length")
    n = a.size
    if n < 2:
        raise DegenerateTestError("paired t-test needs at least two pairs")
    diff = a - b
    sd = float(np.std(diff, ddof=1))
    if sd == 0.0:
        raise DegenerateTestError("paired differences have zero variance")
    t = float(np.mean(diff)) / (sd / math.sqrt(n))
    return t, t_cdf(t, n - 1)
