"""Closed-form ground truth for the synthetic Gaussian model.

Given A=a and Y=y, features are N(mu_{a,y}, sigma^2 I).  Binary-attribute
specs place the means at (2a-1, 2y-1); multi-class specs at (2y-1) e_a.  In
both layouts mu_{a,1} - mu_{a,0} has length 2, so thresholding the true score
eta_a at t selects the half-space where the projected coordinate exceeds
sigma^2 log(q_a(t)) / 2 with q_a(t) = t (1-p) / ((1-t) p).  Every rate below
follows from that reduction.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtri

from .data import TabularDataset
from .errors import DomainError, OracleInfeasibleError, RECOMMENDATION, UnreachableTargetError
from .special import log_norm_sf, norm_sf

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class GaussianModelSpec:
    group_probs: tuple
    label_probs: tuple
    sigma: float = 2.0
    layout: str = ""

    def __post_init__(self):
        pa = tuple(float(v) for v in self.group_probs)
        py = tuple(float(v) for v in self.label_probs)
        object.__setattr__(self, "group_probs", pa)
        object.__setattr__(self, "label_probs", py)
        if len(pa) != len(py) or not pa:
            raise DomainError("group_probs and label_probs must have the same nonzero length")
        if abs(sum(pa) - 1.0) > 1e-12 or any(p <= 0 for p in pa):
            raise DomainError(f"group probabilities must be positive and sum to 1; got {pa}")
        if any(not 0.0 < p < 1.0 for p in py):
            raise DomainError(f"label probabilities must lie in (0, 1); got {py}")
        if not self.sigma > 0:
            raise DomainError("sigma must be positive")
        layout = self.layout or ("binary" if len(pa) == 2 else "multiclass")
        if layout not in ("binary", "multiclass"):
            raise DomainError(f"unknown layout {layout!r}")
        if layout == "binary" and len(pa) != 2:
            raise DomainError("the binary layout needs exactly two groups")
        object.__setattr__(self, "layout", layout)

    @classmethod
    def table1(cls, p: float = 0.6, p_a1: float = 0.3, p_y0: float = 0.2, sigma: float = 2.0):
        """Two groups with P(A=1)=p_a1, P(Y=1|A=0)=p_y0 and P(Y=1|A=1)=p."""
        return cls((1.0 - p_a1, p_a1), (p_y0, p), sigma)

    @property
    def num_groups(self) -> int:
        return len(self.group_probs)

    @property
    def dim(self) -> int:
        return 2 if self.layout == "binary" else self.num_groups

    def mean(self, a: int, y: int) -> np.ndarray:
        if self.layout == "binary":
            return np.array([2.0 * a - 1.0, 2.0 * y - 1.0])
        mu = np.zeros(self.num_groups)
        mu[a] = 2.0 * y - 1.0
        return mu

    def means(self) -> np.ndarray:
        """Array of shape (groups, 2, dim) indexed by [a, y]."""
        return np.array([[self.mean(a, y) for y in (0, 1)] for a in range(self.num_groups)])

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class OracleFairSolution:
    t_star: float
    anchor: int
    matched_thresholds: dict
    fair_accuracy: float
    fair_risk: float
    fair_dpp: float
    uncon_accuracy: float
    uncon_risk: float
    uncon_dpp: float
    condition_value: float
    condition_min_ppv: float
    condition_max_base_rate: float
    cost: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["matched_thresholds"] = {str(k): v for k, v in self.matched_thresholds.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OracleFairSolution":
        d = dict(d)
        d["matched_thresholds"] = {int(k): v for k, v in d["matched_thresholds"].items()}
        return cls(**d)


def _open_uniform(rng, size):
    # uniforms on the open interval (0, 1), so the inverse CDF stays finite
    return (rng.integers(0, 2 ** 53, size=size, dtype=np.int64) + 0.5) / 2.0 ** 53


def sample(spec: GaussianModelSpec, n: int, seed) -> TabularDataset:
    """Draw ``n`` rows; Gaussian noise comes from the inverse normal CDF."""
    if n < 1:
        raise DomainError("n must be at least 1")
    rng = np.random.default_rng(seed)
    cum = np.cumsum(spec.group_probs)
    cum[-1] = 1.0
    a = np.searchsorted(cum, _open_uniform(rng, n), side="right")
    y = (_open_uniform(rng, n) < np.asarray(spec.label_probs)[a]).astype(np.int8)
    noise = ndtri(_open_uniform(rng, (n, spec.dim)))
    x = spec.means()[a, y] + spec.sigma * noise
    return TabularDataset(x, a, y, num_groups=spec.num_groups,
                          feature_names=tuple(f"x{i + 1}" for i in range(spec.dim)))


def eta(spec: GaussianModelSpec, x, a):
    """True P(Y=1 | X=x, A=a); vectorised over rows of ``x`` and ``a``."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != spec.dim:
        raise DomainError(f"expected {spec.dim}-dimensional features, got {x.shape[1]}")
    a = np.broadcast_to(np.asarray(a, dtype=np.int64), (x.shape[0],))
    mu = spec.means()
    p = np.asarray(spec.label_probs)[a]
    d0 = np.sum((x - mu[a, 0]) ** 2, axis=1)
    d1 = np.sum((x - mu[a, 1]) ** 2, axis=1)
    s = np.log(p) - np.log1p(-p) + (d0 - d1) / (2.0 * spec.sigma ** 2)
    e = np.exp(-np.abs(s))
    out = np.where(s >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return float(out[0]) if scalar else out


def _cut(spec, a, t):
    # standardized projected cut-off: sigma * log(q_a(t)) / 2
    p = spec.label_probs[a]
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore"):
        logq = np.log(t) - np.log1p(-t) + math.log1p(-p) - math.log(p)
    return spec.sigma * logq / 2.0


def selection_rates(spec: GaussianModelSpec, a: int, t):
    """(P(eta_a >= t | A=a, Y=1), P(eta_a >= t | A=a, Y=0))."""
    u = _cut(spec, a, t)
    return norm_sf(u - 1.0 / spec.sigma), norm_sf(u + 1.0 / spec.sigma)


def _ppv(spec, a, t):
    p = spec.label_probs[a]
    u = _cut(spec, a, t)
    log_pos = math.log(p) + log_norm_sf(u - 1.0 / spec.sigma)
    log_neg = math.log1p(-p) + log_norm_sf(u + 1.0 / spec.sigma)
    return 1.0 / (1.0 + np.exp(log_neg - log_pos))


def ppv_closed_form(spec: GaussianModelSpec, a: int, t):
    """P(Y=1 | eta_a(X) > t, A=a) for t in (0, 1); vectorised over ``t``."""
    tt = np.asarray(t, dtype=float)
    if np.any(~((tt > 0) & (tt < 1))):
        raise DomainError("threshold must lie in the open interval (0, 1)")
    out = _ppv(spec, a, tt)
    return float(out) if np.ndim(out) == 0 else out


def condition_rhs(spec: GaussianModelSpec, c: float, group: int = 0) -> float:
    """PPV of ``group`` under the unconstrained Bayes rule at cost ``c``.

    With the default group 0 this is the bound the other group's base rate
    must not exceed for two-group specs.
    """
    if not 0.0 < c < 1.0:
        raise DomainError("cost must lie in (0, 1)")
    return ppv_closed_form(spec, group, c)


def condition_check(spec: GaussianModelSpec, c: float) -> tuple[bool, float, float]:
    """Symmetric form over all groups: (holds, min_a PPV_a(c), max_a p_{Y|a})."""
    lhs = min(condition_rhs(spec, c, a) for a in range(spec.num_groups))
    rhs = max(spec.label_probs)
    return lhs >= rhs, lhs, rhs


def _bisect_threshold(spec, a, target, iters=80):
    target = np.asarray(target, dtype=float)
    lo = np.zeros_like(target)
    hi = np.ones_like(target)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        below = _ppv(spec, a, mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def match_threshold(spec: GaussianModelSpec, a: int, target):
    """Threshold t_a with closed-form PPV_a(t_a) equal to ``target``."""
    tgt = np.asarray(target, dtype=float)
    p = spec.label_probs[a]
    if np.any(tgt < p) or np.any(tgt >= 1.0):
        raise UnreachableTargetError(
            f"group {a} can only reach PPV in [{p}, 1); target {target} is outside")
    out = _bisect_threshold(spec, a, tgt)
    return float(out) if np.ndim(out) == 0 else out


def match_t0(spec: GaussianModelSpec, t, anchor: int = 1, group: int = 0):
    """T_0(t): the ``group`` threshold whose PPV equals the ``anchor`` PPV at t."""
    return match_threshold(spec, group, ppv_closed_form(spec, anchor, t))


def rates(spec: GaussianModelSpec, thresholds: Sequence[float], c: float) -> dict:
    """Accuracy, cost-sensitive risk and DPP of I(eta_a >= t_a)."""
    pa = np.asarray(spec.group_probs)
    py = np.asarray(spec.label_probs)
    tpr, fpr = zip(*(selection_rates(spec, a, t) for a, t in enumerate(thresholds)))
    tpr, fpr = np.array(tpr, dtype=float), np.array(fpr, dtype=float)
    fn = pa * py * (1.0 - tpr)
    fp = pa * (1.0 - py) * fpr
    tp = pa * py * tpr
    group_ppv = tp / (tp + fp)
    overall = tp.sum() / (tp + fp).sum()
    return {
        "accuracy": float(1.0 - fn.sum() - fp.sum()),
        "risk": float((1.0 - c) * fn.sum() + c * fp.sum()),
        "dpp": float(np.abs(group_ppv - overall).sum()),
        "group_ppv": group_ppv,
    }


def fair_risk_curve(spec: GaussianModelSpec, t, c: float, anchor: int):
    """Risk of the PPV-matched rule parameterized by the anchor threshold ``t``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    target = _ppv(spec, anchor, t)
    risk = np.zeros_like(t)
    thresholds = {}
    for a in range(spec.num_groups):
        ta = t if a == anchor else _bisect_threshold(spec, a, target)
        thresholds[a] = ta
        tpr, fpr = selection_rates(spec, a, ta)
        p, w = spec.label_probs[a], spec.group_probs[a]
        risk += (1.0 - c) * w * p * (1.0 - tpr) + c * w * (1.0 - p) * fpr
    return risk, thresholds


def golden_section(f, lo, hi, tol=1e-8):
    """Minimizer of a unimodal ``f`` on [lo, hi], to interval width ``tol``."""
    c = hi - INV_PHI * (hi - lo)
    d = lo + INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc <= fd:
            hi, d, fd = d, c, fc
            c = hi - INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + INV_PHI * (hi - lo)
            fd = f(d)
    return 0.5 * (lo + hi)


def anchor_t_min(spec: GaussianModelSpec, anchor: int) -> float:
    """Smallest anchor threshold whose PPV reaches the largest base rate."""
    top = max(spec.label_probs)
    if spec.label_probs[anchor] >= top:
        return 0.0
    return float(_bisect_threshold(spec, anchor, top))


def solve_fair_optimal(spec: GaussianModelSpec, c: float, anchor: int | None = None,
                       grid_step: float = 1e-4, tol: float = 1e-8) -> OracleFairSolution:
    """Fair Bayes-optimal group-wise thresholds under predictive parity.

    Scans the anchor threshold on a grid over its feasible range, then
    refines the best cell by golden-section search.  The anchor defaults to
    the group with the largest base rate, whose PPV reaches every other
    group's range for any threshold.
    """
    holds, lhs, top = condition_check(spec, c)
    if not holds:
        raise OracleInfeasibleError(f"{RECOMMENDATION} (min PPV {lhs:.6f} < max base rate {top:.6f})")
    if anchor is None:
        anchor = int(np.argmax(spec.label_probs))

    lo = anchor_t_min(spec, anchor)
    grid = lo + grid_step * np.arange(1, int(math.ceil((1.0 - lo) / grid_step)))
    grid = grid[grid < 1.0]
    curve, _ = fair_risk_curve(spec, grid, c, anchor)
    k = int(np.argmin(curve))
    left = grid[k - 1] if k > 0 else 0.5 * (lo + grid[0])
    right = grid[k + 1] if k + 1 < grid.size else 0.5 * (grid[-1] + 1.0)
    t_star = golden_section(lambda t: float(fair_risk_curve(spec, t, c, anchor)[0][0]),
                            left, right, tol)

    _, th = fair_risk_curve(spec, t_star, c, anchor)
    matched = {a: float(th[a][0]) for a in range(spec.num_groups)}
    fair = rates(spec, [matched[a] for a in range(spec.num_groups)], c)
    uncon = rates(spec, [c] * spec.num_groups, c)
    return OracleFairSolution(
        t_star=float(t_star), anchor=anchor, matched_thresholds=matched,
        fair_accuracy=fair["accuracy"], fair_risk=fair["risk"], fair_dpp=fair["dpp"],
        uncon_accuracy=uncon["accuracy"], uncon_risk=uncon["risk"], uncon_dpp=uncon["dpp"],
        condition_value=condition_rhs(spec, c, 0), condition_min_ppv=lhs,
        condition_max_base_rate=top, cost=c,
    )
