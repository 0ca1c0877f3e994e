"""Group-wise threshold search for predictive parity.

Given estimated scores, check the empirical sufficient condition, then scan
the anchor group's threshold over a grid.  For each anchor threshold every
other group gets the observed-score threshold whose empirical PPV is closest
to the anchor's, and the grid point with the lowest cost-weighted empirical
risk wins.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Mapping, NamedTuple

import numpy as np

from .data import GroupView, group_views
from .errors import (
    RECOMMENDATION,
    CalibrationInfeasibleError,
    ConfigError,
    UndefinedPPVError,
    UnreachableTargetError,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CalibrationConfig:
    cost: float = 0.5
    anchor_group: int = 0
    grid_step: float = 0.001
    condition_slack: float = 0.0
    ppv_match_tol: float = 0.02
    # when set, the slack grows by z_{1-alpha} binomial standard errors of lhs - rhs
    condition_alpha: float | None = None

    def __post_init__(self):
        if not 0.0 <= self.cost <= 1.0:
            raise ConfigError("cost must lie in [0, 1]")
        if not self.grid_step > 0:
            raise ConfigError("grid_step must be positive")
        if self.condition_slack < 0 or self.ppv_match_tol < 0:
            raise ConfigError("condition_slack and ppv_match_tol must be nonnegative")
        if self.condition_alpha is not None and not 0.0 < self.condition_alpha < 1.0:
            raise ConfigError("condition_alpha must lie in (0, 1)")


@dataclass(frozen=True)
class ThresholdSet:
    thresholds: dict

    @classmethod
    def constant(cls, t: float, groups) -> "ThresholdSet":
        return cls({int(a): float(t) for a in groups})

    def apply(self, scores, groups) -> np.ndarray:
        """Vectorised ``I(score >= t_group)``."""
        scores = np.asarray(scores, dtype=float)
        groups = np.asarray(groups, dtype=np.int64)
        missing = set(np.unique(groups).tolist()) - set(self.thresholds)
        if missing:
            raise KeyError(f"no threshold for groups {sorted(missing)}")
        lookup = np.full(int(groups.max()) + 1 if groups.size else 0, np.inf)
        for a, t in self.thresholds.items():
            if a < lookup.size:
                lookup[a] = t
        return (scores >= lookup[groups]).astype(np.int8)

    def to_dict(self) -> dict:
        return {str(a): t for a, t in self.thresholds.items()}

    @classmethod
    def from_dict(cls, d: Mapping) -> "ThresholdSet":
        return cls({int(a): float(t) for a, t in d.items()})


def predict(thresholds: ThresholdSet, score: float, group: int) -> int:
    """1 iff ``score >= thresholds[group]``."""
    try:
        t = thresholds.thresholds[group]
    except KeyError:
        raise KeyError(f"no threshold for group {group}") from None
    return int(score >= t)


class ConditionCheck(NamedTuple):
    holds: bool
    lhs: float
    rhs: float
    undefined_groups: tuple = ()
    slack: float = 0.0


@dataclass
class CalibrationResult:
    condition_holds: bool
    condition_lhs: float
    condition_rhs: float
    base_rates: dict
    cost: float
    anchor_group: int
    thresholds: ThresholdSet | None = None
    anchor_t: float | None = None
    achieved_ppv: dict = field(default_factory=dict)
    residuals: dict = field(default_factory=dict)
    risk_trace: list = field(default_factory=list)
    message: str = ""
    condition_slack: float = 0.0

    def to_dict(self) -> dict:
        return {
            "condition_holds": self.condition_holds,
            "condition_lhs": self.condition_lhs,
            "condition_rhs": self.condition_rhs,
            "base_rates": {str(a): v for a, v in self.base_rates.items()},
            "cost": self.cost,
            "anchor_group": self.anchor_group,
            "thresholds": None if self.thresholds is None else self.thresholds.to_dict(),
            "anchor_t": self.anchor_t,
            "achieved_ppv": {str(a): v for a, v in self.achieved_ppv.items()},
            "residuals": {str(a): v for a, v in self.residuals.items()},
            "risk_trace": [[t, r] for t, r in self.risk_trace],
            "message": self.message,
            "condition_slack": self.condition_slack,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "CalibrationResult":
        ints = lambda m: {int(a): v for a, v in m.items()}  # noqa: E731
        return cls(
            condition_holds=d["condition_holds"], condition_lhs=d["condition_lhs"],
            condition_rhs=d["condition_rhs"], base_rates=ints(d["base_rates"]),
            cost=d["cost"], anchor_group=d["anchor_group"],
            thresholds=None if d["thresholds"] is None else ThresholdSet.from_dict(d["thresholds"]),
            anchor_t=d["anchor_t"], achieved_ppv=ints(d["achieved_ppv"]),
            residuals=ints(d["residuals"]),
            risk_trace=[(t, r) for t, r in d["risk_trace"]], message=d.get("message", ""),
            condition_slack=d.get("condition_slack", 0.0),
        )


class _PPVTable:
    """Prefix counts of one view, and its PPV at every distinct score."""

    def __init__(self, view: GroupView):
        s = view.scores
        y = view.labels.astype(np.int64)
        self.n = s.size
        self.positives = int(y.sum())
        self.asc_scores = s[::-1]
        self.cum_pos = np.cumsum(y)
        last = np.flatnonzero(np.append(s[1:] != s[:-1], True))
        # ascending candidate thresholds and their PPV
        self.cand = s[last][::-1]
        self.cand_ppv = (self.cum_pos[last] / (last + 1))[::-1]
        # lowest threshold for each distinct PPV value, sorted by PPV
        order = np.lexsort((self.cand, self.cand_ppv))
        ppv_sorted = self.cand_ppv[order]
        first = np.append(True, ppv_sorted[1:] != ppv_sorted[:-1])
        self.uppv = ppv_sorted[first]
        self.uppv_t = self.cand[order][first]

    def selected(self, t):
        """Number of rows with score >= t (vectorised)."""
        return self.n - np.searchsorted(self.asc_scores, t, side="left")

    def counts(self, t):
        k = self.selected(t)
        tp = np.where(k > 0, self.cum_pos[np.maximum(k, 1) - 1], 0)
        return tp, k - tp

    def ppv(self, t):
        k = self.selected(t)
        if np.any(k == 0):
            raise UndefinedPPVError("no score at or above the threshold")
        return self.cum_pos[k - 1] / k

    def match(self, target: float) -> tuple[float, float]:
        i = int(np.searchsorted(self.uppv, target))
        best = None
        for j in (i - 1, i):
            if 0 <= j < self.uppv.size:
                key = (abs(self.uppv[j] - target), self.uppv_t[j])
                if best is None or key < best[0]:
                    best = (key, j)
        j = best[1]
        return float(self.uppv_t[j]), float(self.uppv[j])


def ppv_hat(v: GroupView, t: float) -> float:
    """Share of positive labels among rows with score >= t."""
    sel = v.scores >= t
    k = int(np.count_nonzero(sel))
    if k == 0:
        raise UndefinedPPVError(f"group {v.group}: no score >= {t}")
    return int(v.labels[sel].sum()) / k


def base_rate_hat(v: GroupView) -> float:
    return int(v.labels.sum()) / len(v)


def check_condition(views: Mapping[int, GroupView], cfg: CalibrationConfig) -> ConditionCheck:
    """Empirical check: min_a PPV_a(c) + slack >= max_a base rate."""
    base = {a: base_rate_hat(v) for a, v in views.items()}
    top = max(base, key=lambda a: (base[a], -a))
    rhs = base[top]
    ppvs, undefined = {}, []
    for a, v in sorted(views.items()):
        try:
            ppvs[a] = ppv_hat(v, cfg.cost)
        except UndefinedPPVError:
            undefined.append(a)
    lhs = min(ppvs.values()) if ppvs else 0.0
    if undefined:
        log.info("PPV at c=%s undefined for groups %s", cfg.cost, undefined)
        return ConditionCheck(False, lhs, rhs, tuple(undefined), cfg.condition_slack)

    slack = cfg.condition_slack
    if cfg.condition_alpha is not None:
        low = min(ppvs, key=lambda a: (ppvs[a], a))
        k = int(np.count_nonzero(views[low].scores >= cfg.cost))
        var = lhs * (1.0 - lhs) / k + rhs * (1.0 - rhs) / len(views[top])
        slack += NormalDist().inv_cdf(1.0 - cfg.condition_alpha) * math.sqrt(var)
    return ConditionCheck(lhs + slack >= rhs, lhs, rhs, (), slack)


def match_threshold(v: GroupView, target_ppv: float) -> tuple[float, float]:
    """Observed score whose PPV is closest to ``target_ppv``.

    Ties go to the smallest threshold.  Returns (threshold, achieved PPV).
    """
    if target_ppv < base_rate_hat(v) or target_ppv > 1.0:
        raise UnreachableTargetError(
            f"group {v.group}: target PPV {target_ppv} outside [{base_rate_hat(v)}, 1]")
    return _PPVTable(v).match(target_ppv)


def calibrate(views: Mapping[int, GroupView], cfg: CalibrationConfig) -> CalibrationResult:
    """Fair thresholds minimizing the empirical cost-sensitive risk.

    The risk is evaluated on the union of ``views``.  When the sufficient
    condition fails no thresholds are returned.
    """
    if not views:
        raise ConfigError("calibration needs at least one group")
    if cfg.anchor_group not in views:
        raise ConfigError(f"anchor group {cfg.anchor_group} has no view")
    c = cfg.cost
    base = {a: base_rate_hat(v) for a, v in sorted(views.items())}
    check = check_condition(views, cfg)
    result = CalibrationResult(check.holds, check.lhs, check.rhs, base, c, cfg.anchor_group,
                               condition_slack=check.slack)
    if not check.holds:
        detail = f" (PPV undefined for groups {list(check.undefined_groups)})" if check.undefined_groups else ""
        result.message = f"{RECOMMENDATION}{detail}"
        return result

    tables = {a: _PPVTable(v) for a, v in sorted(views.items())}
    anchor = tables[cfg.anchor_group]
    top = check.rhs
    ok = np.flatnonzero(anchor.cand_ppv >= top)
    if ok.size == 0:
        raise CalibrationInfeasibleError(
            f"anchor group {cfg.anchor_group} never reaches PPV {top:.6f}; "
            f"its largest empirical PPV is {anchor.cand_ppv.max():.6f}")
    t_min = float(anchor.cand[ok[0]])
    t_max = float(anchor.cand[-1])
    steps = int(math.floor((t_max - t_min) / cfg.grid_step + 1e-9))
    grid = t_min + cfg.grid_step * np.arange(steps + 1)
    # absorb rounding so the last grid point never overshoots the top score
    grid = grid[grid <= t_max + 1e-9 * cfg.grid_step]
    grid = np.minimum(grid, t_max)

    target = anchor.ppv(grid)
    n = sum(tb.n for tb in tables.values())
    weighted = np.zeros(grid.size)
    per_group = {}
    for a, tb in tables.items():
        if a == cfg.anchor_group:
            ta = grid
            achieved = target
        else:
            ta, achieved = map(np.array, zip(*(tb.match(float(x)) for x in target)))
        tp, fp = tb.counts(ta)
        weighted += c * fp + (1.0 - c) * (tb.positives - tp)
        per_group[a] = (ta, achieved)
    risk = weighted / n

    k = int(np.argmin(risk))
    result.anchor_t = float(grid[k])
    result.thresholds = ThresholdSet({a: float(per_group[a][0][k]) for a in tables})
    result.achieved_ppv = {a: float(per_group[a][1][k]) for a in tables}
    result.residuals = {a: abs(result.achieved_ppv[a] - float(target[k])) for a in tables}
    result.risk_trace = list(zip(grid.tolist(), risk.tolist()))
    worst = max(result.residuals.values())
    if worst > cfg.ppv_match_tol:
        log.warning("PPV matching residual %.4f exceeds tolerance %.4f", worst, cfg.ppv_match_tol)
    return result


def calibrate_scores(scores, groups, labels, cfg: CalibrationConfig) -> CalibrationResult:
    """Calibrate directly from flat (scores, groups, labels) arrays."""
    return calibrate(group_views(groups, scores, labels), cfg)
