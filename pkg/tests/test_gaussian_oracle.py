import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fairbayes_dpp.errors import DomainError, OracleInfeasibleError, UnreachableTargetError
from fairbayes_dpp.gaussian_oracle import (GaussianModelSpec, OracleFairSolution, anchor_t_min,
                                           condition_check, condition_rhs, eta, fair_risk_curve,
                                           golden_section, match_t0, match_threshold,
                                           ppv_closed_form, rates, sample, selection_rates,
                                           solve_fair_optimal)

# T0(1/2) for P(Y=1|A=1)=0.6, P(Y=1|A=0)=0.2, sigma=2; checked by Monte Carlo and quadrature below
T0_HALF_P06 = 0.6451324240649063


def density_eta(spec, x, a):
    """True score from the Gaussian densities, written independently of the package."""
    p = spec.label_probs[a]
    mu1, mu0 = spec.mean(a, 1), spec.mean(a, 0)
    s2 = spec.sigma ** 2
    f1 = np.exp(-np.sum((x - mu1) ** 2, axis=-1) / (2 * s2))
    f0 = np.exp(-np.sum((x - mu0) ** 2, axis=-1) / (2 * s2))
    return p * f1 / (p * f1 + (1 - p) * f0)


def quad_ppv(p, sigma, t):
    """PPV by integrating the projected 1-d mixture in high precision."""
    with mpmath.workdps(30):
        p, sigma, t = mpmath.mpf(p), mpmath.mpf(sigma), mpmath.mpf(t)

        def score(z):
            f1 = mpmath.npdf(z, 1, sigma)
            f0 = mpmath.npdf(z, -1, sigma)
            return p * f1 / (p * f1 + (1 - p) * f0)

        cut = mpmath.findroot(lambda z: score(z) - t, 0)
        tp = p * (1 - mpmath.ncdf(cut, 1, sigma))
        fp = (1 - p) * (1 - mpmath.ncdf(cut, -1, sigma))
        return float(tp / (tp + fp))


def test_eta_examples():
    spec = GaussianModelSpec.table1(0.5)
    assert eta(spec, [0.0, 1.0], 1) == pytest.approx(1 / (1 + math.exp(-0.5)), abs=1e-15)
    assert eta(spec, [0.0, 1.0], 1) == pytest.approx(0.6225, abs=5e-5)
    spec = GaussianModelSpec.table1(0.6)
    for a in (0, 1):
        for x1 in (-3.0, 0.0, 2.5):
            assert eta(spec, [x1, 0.0], a) == pytest.approx(spec.label_probs[a], abs=1e-15)


def test_eta_matches_density_formula():
    rng = np.random.default_rng(0)
    for spec in (GaussianModelSpec.table1(0.4),
                 GaussianModelSpec((0.3, 0.3, 0.4), (0.2, 0.6, 0.3))):
        x = rng.normal(scale=3, size=(500, spec.dim))
        a = rng.integers(0, spec.num_groups, size=500)
        want = np.array([density_eta(spec, x[i], a[i]) for i in range(500)])
        np.testing.assert_allclose(eta(spec, x, a), want, rtol=1e-12)


def test_ppv_closed_form_examples():
    spec = GaussianModelSpec.table1(0.6)
    # group 0 at t = p_0: cut 0, PPV = 0.2 Phi(1/2) / (0.2 Phi(1/2) + 0.8 Phi(-1/2))
    ph = 0.5 * math.erfc(-0.5 / math.sqrt(2))
    assert ppv_closed_form(spec, 0, 0.2) == pytest.approx(0.2 * ph / (0.2 * ph + 0.8 * (1 - ph)), rel=1e-14)
    assert ppv_closed_form(spec, 0, 0.2) == pytest.approx(0.359, abs=5e-4)
    assert condition_rhs(spec, 0.5) == pytest.approx(0.613, abs=0.002)
    for a, t in ((0, 0.5), (1, 0.3), (1, 0.9), (0, 0.05)):
        assert ppv_closed_form(spec, a, t) == pytest.approx(quad_ppv(spec.label_probs[a], 2.0, t), rel=1e-12)
    with pytest.raises(DomainError):
        ppv_closed_form(spec, 0, 1.0)
    with pytest.raises(DomainError):
        ppv_closed_form(spec, 0, 0.0)


specs = st.builds(
    lambda pa, p0, p1, s: GaussianModelSpec.table1(p1, pa, p0, s),
    st.floats(0.05, 0.95), st.floats(0.02, 0.98), st.floats(0.02, 0.98), st.floats(0.3, 5.0))


@settings(max_examples=50, deadline=None)
@given(specs)
def test_ppv_monotone_and_bounded(spec):
    t = np.linspace(1e-4, 1 - 1e-4, 1000)
    for a in (0, 1):
        v = ppv_closed_form(spec, a, t)
        p = spec.label_probs[a]
        assert np.all(np.diff(v) >= -1e-15)
        assert np.all(v >= p - 1e-12) and np.all(v <= 1.0)
        # PPV at t is at least t: the selected rows all have score >= t
        assert np.all(v >= t - 1e-12)


@settings(max_examples=50, deadline=None)
@given(specs, st.floats(0.001, 1.0))
def test_matched_threshold_reproduces_target(spec, u):
    for a in (0, 1):
        p = spec.label_probs[a]
        target = p + u * (1.0 - 1e-6 - p)
        t = match_threshold(spec, a, target)
        got = ppv_closed_form(spec, a, t) if 0 < t < 1 else target
        assert got == pytest.approx(target, abs=1e-9)


def test_match_threshold_unreachable():
    spec = GaussianModelSpec.table1(0.6)
    with pytest.raises(UnreachableTargetError):
        match_threshold(spec, 0, 0.1)
    with pytest.raises(UnreachableTargetError):
        match_threshold(spec, 0, 1.0)


def test_match_t0_symmetry_and_round_trip():
    same = GaussianModelSpec((0.5, 0.5), (0.4, 0.4))
    for t in (0.1, 0.4, 0.77):
        assert match_t0(same, t) == pytest.approx(t, abs=1e-12)
    spec = GaussianModelSpec.table1(0.6)
    for t in (0.3, 0.5, 0.8):
        t0 = match_t0(spec, t)
        assert match_t0(spec, t0, anchor=0, group=1) == pytest.approx(t, abs=1e-9)


def test_match_t0_regression_value():
    spec = GaussianModelSpec.table1(0.6)
    assert match_t0(spec, 0.5) == pytest.approx(T0_HALF_P06, abs=1e-12)
    assert quad_ppv(0.2, 2.0, T0_HALF_P06) == pytest.approx(quad_ppv(0.6, 2.0, 0.5), abs=1e-12)


@pytest.mark.slow
def test_match_t0_regression_value_by_monte_carlo():
    spec = GaussianModelSpec.table1(0.6)
    rng = np.random.default_rng(2024)
    n, chunk = 10_000_000, 2_500_000
    ppv = {}
    for a, t in ((1, 0.5), (0, T0_HALF_P06)):
        p = spec.label_probs[a]
        hits = pos = 0
        for _ in range(n // chunk):
            y = rng.uniform(size=chunk) < p
            # coordinate along mu_{a,1} - mu_{a,0}; the score depends on x only through it
            z = np.where(y, 1.0, -1.0) + 2.0 * rng.standard_normal(chunk)
            sel = density_eta(GaussianModelSpec((1.0,), (p,), 2.0, "multiclass"), z[:, None], 0) >= t
            hits += int(sel.sum())
            pos += int(y[sel].sum())
        m = pos / hits
        ppv[a] = (m, math.sqrt(m * (1 - m) / hits))
        assert abs(m - ppv_closed_form(spec, a, t)) < 3 * ppv[a][1]
    assert abs(ppv[0][0] - ppv[1][0]) < 3 * math.hypot(ppv[0][1], ppv[1][1])


def test_selection_rates_by_monte_carlo():
    rng = np.random.default_rng(9)
    n = 1_000_000
    pairs = [(GaussianModelSpec.table1(p), a, t) for p in (0.3, 0.6) for a in (0, 1)
             for t in (0.15, 0.35, 0.5, 0.65, 0.85)]
    assert len(pairs) == 20
    for spec, a, t in pairs:
        tpr, fpr = selection_rates(spec, a, t)
        for y, rate in ((1, tpr), (0, fpr)):
            x = spec.mean(a, y) + 2.0 * rng.standard_normal((n // 2, 2))
            hit = np.mean(density_eta(spec, x, a) >= t)
            se = math.sqrt(max(rate * (1 - rate), 1e-12) / (n // 2))
            assert abs(hit - rate) < 4 * se + 1e-12


def test_sampling_frequencies_and_determinism():
    spec = GaussianModelSpec.table1(0.6)
    n = 200_000
    ds = sample(spec, n, 7)
    frac1 = ds.groups.mean()
    assert abs(frac1 - 0.3) < 3 * math.sqrt(0.21 / n)
    for a in (0, 1):
        m = ds.groups == a
        p = spec.label_probs[a]
        assert abs(ds.labels[m].mean() - p) < 3 * math.sqrt(p * (1 - p) / m.sum())
        for y in (0, 1):
            rows = ds.features[m & (ds.labels == y)]
            se = 2.0 / math.sqrt(len(rows))
            assert np.all(np.abs(rows.mean(axis=0) - spec.mean(a, y)) < 4 * se)
            assert np.all(np.abs(rows.std(axis=0) - 2.0) < 0.05)
    again = sample(spec, n, 7)
    np.testing.assert_array_equal(ds.features, again.features)
    assert not np.array_equal(sample(spec, 100, 8).features, sample(spec, 100, 7).features)


def test_multiclass_layout():
    spec = GaussianModelSpec((0.3, 0.3, 0.4), (0.2, 0.6, 0.3))
    assert spec.layout == "multiclass" and spec.dim == 3
    np.testing.assert_array_equal(spec.mean(1, 1), [0, 1, 0])
    np.testing.assert_array_equal(spec.mean(2, 0), [0, 0, -1])
    ds = sample(spec, 1000, 0)
    assert ds.features.shape == (1000, 3) and ds.num_groups == 3
    with pytest.raises(DomainError):
        GaussianModelSpec((0.5, 0.6), (0.2, 0.3))
    with pytest.raises(DomainError):
        GaussianModelSpec((0.5, 0.5), (0.0, 0.3))


TABLE_ROWS = [
    # p, fair accuracy, unconstrained DPP, unconstrained accuracy
    (0.2, 0.814, 0.000, 0.814),
    (0.3, 0.794, 0.024, 0.794),
    (0.4, 0.781, 0.050, 0.781),
    (0.5, 0.775, 0.078, 0.777),
    (0.6, 0.778, 0.113, 0.781),
]


@pytest.mark.parametrize("p,fair_acc,uncon_dpp,uncon_acc", TABLE_ROWS)
def test_fair_optimum_reference_values(p, fair_acc, uncon_dpp, uncon_acc):
    sol = solve_fair_optimal(GaussianModelSpec.table1(p), 0.5)
    assert sol.fair_accuracy == pytest.approx(fair_acc, abs=0.002)
    assert sol.uncon_dpp == pytest.approx(uncon_dpp, abs=0.002)
    assert sol.uncon_accuracy == pytest.approx(uncon_acc, abs=0.002)
    assert sol.fair_dpp < 1e-8
    assert sol.fair_risk >= sol.uncon_risk - 1e-12


@pytest.mark.parametrize("p", [0.3, 0.6])
def test_fair_optimum_is_a_local_minimum(p):
    spec = GaussianModelSpec.table1(p)
    sol = solve_fair_optimal(spec, 0.5)
    best = fair_risk_curve(spec, sol.t_star, 0.5, sol.anchor)[0][0]
    assert best == pytest.approx(sol.fair_risk, abs=1e-12)
    for d in (1e-4, 1e-2):
        for t in (sol.t_star - d, sol.t_star + d):
            if anchor_t_min(spec, sol.anchor) <= t < 1:
                assert fair_risk_curve(spec, t, 0.5, sol.anchor)[0][0] >= best - 1e-12
    # the matched group hits the anchor's PPV
    r = rates(spec, [sol.matched_thresholds[0], sol.matched_thresholds[1]], 0.5)
    assert abs(r["group_ppv"][0] - r["group_ppv"][1]) < 1e-9


def test_unconstrained_rule_is_optimal_among_constant_shifts():
    spec = GaussianModelSpec.table1(0.6)
    base = rates(spec, [0.5, 0.5], 0.5)["risk"]
    for t0 in (0.45, 0.49, 0.51, 0.55):
        for t1 in (0.45, 0.5, 0.55):
            assert rates(spec, [t0, t1], 0.5)["risk"] >= base - 1e-15


def test_condition_failure_raises():
    spec = GaussianModelSpec.table1(0.7)
    holds, lhs, rhs = condition_check(spec, 0.5)
    assert not holds and rhs == 0.7
    with pytest.raises(OracleInfeasibleError):
        solve_fair_optimal(spec, 0.5)


def test_multiclass_fair_solution_equalizes_ppv():
    spec = GaussianModelSpec((0.3, 0.3, 0.4), (0.2, 0.6, 0.3))
    sol = solve_fair_optimal(spec, 0.5)
    r = rates(spec, [sol.matched_thresholds[a] for a in range(3)], 0.5)
    assert np.ptp(r["group_ppv"]) < 1e-9
    assert sol.fair_risk >= sol.uncon_risk
    assert OracleFairSolution.from_dict(sol.to_dict()) == sol


def test_golden_section():
    assert golden_section(lambda x: (x - 0.3) ** 2, 0.0, 1.0, 1e-10) == pytest.approx(0.3, abs=1e-9)
