import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpredict import el as E
from qpredict.dgp import TimeSeriesSample
from qpredict.el import (el_confidence_region, el_log_ratio, el_statistic, el_test, score_covariance, score_panel,
                         solve_lambda, split_indices)
from qpredict.exceptions import ConfigurationError, DataError, DegenerateRegressorError

from conftest import make_sample


def test_split_indices_examples():
    b1, b2, m = split_indices(10, min_n=2)
    assert (list(b1), list(b2), m) == ([1, 2, 3, 4, 5], [6, 7, 8, 9, 10], 5)
    b1, b2, m = split_indices(11, min_n=2)
    assert (list(b1), list(b2), m) == ([1, 2, 3, 4, 5], [6, 7, 8, 9, 10], 5)
    with pytest.raises(DataError):
        split_indices(39)
    assert split_indices(40)[2] == 20


def test_score_panel_branches():
    s = make_sample(n=100, seed=1)
    tau = 0.3
    low = score_panel(s, tau, alpha=-1e6, beta=0.0, gamma_lag=0.0)
    assert np.all(low.z[:, 0] == tau)
    assert low.z.shape == (50, 3) and low.columns == ("alpha", "beta", "gamma")
    static = score_panel(s, tau, 0.0, 0.0)
    assert static.z.shape == (50, 2)
    assert list(static.block1) == list(range(1, 51)) and list(static.block2) == list(range(51, 101))


def test_score_panel_zero_regressor_and_wtilde():
    r = np.random.default_rng(3)
    y = r.standard_normal(80)
    s = TimeSeriesSample(y=y, x=np.zeros(81), y0=0.4)
    p = score_panel(s, 0.5, 0.0, 0.0, 0.0)
    assert np.all(p.z[:, 1] == 0.0)
    # beta = 0 makes the gamma weight the lagged predictand itself
    psi2 = 0.5 - (y[40:80] <= 0.0)
    np.testing.assert_array_equal(p.z[:, 2], psi2 * s.y_lag[40:80])


def test_score_beta_column_bounded():
    s = make_sample(n=400, c=0.0, seed=2)
    for tau in (0.1, 0.5, 0.9):
        z = score_panel(s, tau, 0.1, 0.0, 0.0).z
        assert np.all(np.abs(z[:, 1]) < max(tau, 1 - tau))


def test_score_panel_rejects_nonfinite():
    with pytest.raises(ConfigurationError):
        score_panel(make_sample(n=60), 0.5, float("nan"), 0.0)


def test_solve_lambda_examples():
    assert solve_lambda([1.0, -1.0]).lam[0] == pytest.approx(0.0, abs=1e-14)
    sol = solve_lambda([2.0, -1.0])
    assert sol.converged and sol.lam[0] == pytest.approx(0.25, abs=1e-12)
    bad = solve_lambda([1.0, 2.0, 3.0])
    assert not bad.converged
    deg = solve_lambda(np.zeros((5, 2)))
    assert deg.degenerate and np.all(deg.lam == 0)


def test_el_statistic_examples():
    stat, _ = el_statistic([2.0, -1.0])
    assert stat == pytest.approx(2 * (math.log(1.5) + math.log(0.75)), abs=1e-12)
    assert stat == pytest.approx(0.2355661, abs=1e-7)
    z = np.random.default_rng(0).standard_normal((30, 2))
    stat0, _ = el_statistic(z - z.mean(axis=0))
    assert stat0 == 0.0
    stat_inf, sol = el_statistic(np.abs(z) + 0.1)
    assert stat_inf == math.inf and not sol.converged


def test_el_statistic_scale_and_linear_invariance():
    r = np.random.default_rng(5)
    z = r.standard_normal((60, 3)) + 0.15
    s0, sol0 = el_statistic(z)
    s1, sol1 = el_statistic(7.5 * z)
    assert s1 == pytest.approx(s0, rel=1e-10)
    np.testing.assert_allclose(sol1.lam, sol0.lam / 7.5, rtol=1e-8)
    A = np.array([[2.0, 0.3, 0.0], [0.0, 1.0, -0.4], [0.1, 0.0, 0.5]])
    assert el_statistic(z @ A.T)[0] == pytest.approx(s0, rel=1e-9)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(20, 120))
def test_el_internals_property(seed, d, n):
    r = np.random.default_rng(seed)
    z = r.standard_normal((n, d)) + r.uniform(-0.3, 0.3, d)
    stat, sol = el_statistic(z)
    if not sol.converged:
        return
    arg = 1.0 + z @ sol.lam
    p = 1.0 / (n * arg)
    assert np.all(p > 0)
    assert abs(p.sum() - 1.0) < 1e-8
    assert np.abs((z / arg[:, None]).sum(axis=0)).max() < 1e-8
    assert stat >= 0


def test_batch_and_single_solvers_agree():
    r = np.random.default_rng(8)
    Z = r.standard_normal((6, 80, 3)) + 0.2
    lam_b, conv_b, _, _ = E._solve_lambda_batch(Z)
    for k in range(6):
        sol = solve_lambda(Z[k])
        assert sol.converged == bool(conv_b[k])
        np.testing.assert_allclose(sol.lam, lam_b[k], atol=1e-9)


def test_score_covariance():
    z = np.array([[1.0, 0.0], [0.0, 2.0]])
    np.testing.assert_array_equal(score_covariance(z), [[0.5, 0.0], [0.0, 2.0]])


def test_el_log_ratio_modes_and_dof():
    s = make_sample(n=300, seed=4)
    for mode in ("efficient", "profile", "block_quantile"):
        res = el_log_ratio(s, 0.5, 0.0, 0.0, intercept=mode)
        assert res.dof == 2 and res.statistic >= 0 and 0 <= res.p_value <= 1
    known = el_log_ratio(s, 0.5, 0.0, 0.0, alpha=0.1)
    assert known.dof == 3 and known.alpha == 0.1
    static = el_log_ratio(s, 0.5, 0.0, None)
    assert static.dof == 1 and static.scores.shape[1] == 2
    with pytest.raises(ConfigurationError):
        el_log_ratio(s, 0.5, 0.0, 0.0, intercept="bogus")


def test_el_log_ratio_weights_sum_to_one():
    res = el_log_ratio(make_sample(n=300, seed=6), 0.25, 0.0, 0.0)
    assert res.converged
    assert res.weights.sum() == pytest.approx(1.0, abs=1e-8)


def test_profile_never_exceeds_efficient():
    s = make_sample(n=300, seed=7)
    prof = el_log_ratio(s, 0.5, 0.0, 0.0, intercept="profile").statistic
    eff = el_log_ratio(s, 0.5, 0.0, 0.0, intercept="efficient").statistic
    assert prof <= eff + 1e-12


def test_el_test_hypotheses():
    s = make_sample(n=300, seed=9, gamma_lag=0.2)
    joint = el_test(s, 0.5)
    assert joint.dof == 2 and joint.method == "el" and joint.hypothesis == "joint"
    assert joint.p_value == pytest.approx(1 - __import__("scipy").stats.chi2.cdf(joint.statistic, 2), abs=1e-12)
    for h in ("beta_only", "gamma_only"):
        res = el_test(s, 0.5, h)
        assert res.dof == 1 and res.statistic >= 0
    assert el_test(s, 0.5, dynamic=False).dof == 1
    with pytest.raises(ConfigurationError):
        el_test(s, 0.5, "gamma_only", dynamic=False)
    with pytest.raises(ConfigurationError):
        el_test(s, 0.5, "nonsense")
    assert "max_abs_wtilde" in joint.diagnostics


def test_el_test_detects_strong_predictability():
    s = make_sample(n=500, beta=0.5, c=-5, seed=10)
    assert el_test(s, 0.5).p_value < 0.01


def test_el_test_degenerate_regressor():
    y = np.random.default_rng(1).standard_normal(100)
    s = TimeSeriesSample(y=y, x=np.zeros(101))
    with pytest.raises(DegenerateRegressorError):
        el_test(s, 0.5, "beta_only")


def test_el_test_invariant_to_units():
    s = make_sample(n=300, seed=12)
    scaled = TimeSeriesSample(y=s.y / 100, x=s.x, y0=s.y0 / 100)
    assert el_test(scaled, 0.5).p_value == pytest.approx(el_test(s, 0.5).p_value, rel=1e-8, abs=1e-12)


def test_confidence_region():
    s = make_sample(n=300, seed=13)
    grid = [(b, g) for b in np.linspace(-0.1, 0.1, 5) for g in np.linspace(-0.2, 0.2, 5)]
    r90 = el_confidence_region(s, 0.5, grid, 0.90)
    r99 = el_confidence_region(s, 0.5, grid, 0.99)
    assert set(r90) <= set(r99)
    stats = [el_log_ratio(s, 0.5, b, g).statistic for b, g in grid]
    assert grid[int(np.argmin(stats))] in r90
    assert el_confidence_region(s, 0.5, [0.0, 5.0], 0.95) == [0.0]
    with pytest.raises(ConfigurationError):
        el_confidence_region(s, 0.5, [], 0.95)
