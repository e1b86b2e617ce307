import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qpredict.exceptions import ConfigurationError, DataError
from qpredict.qr import (brute_force_qr_oracle, check_loss, fit_quantile_regression, self_weighted_qr,
                         smoothed_indicator, subgradient_gap)

from conftest import make_sample


def test_check_loss_examples():
    assert check_loss([0.0, 0.0, 0.0], 0.3) == 0.0
    assert check_loss([1.0, -1.0], 0.5) == 1.0
    assert check_loss([2.0], 0.25, weights=[3.0]) == 1.5
    with pytest.raises(DataError):
        check_loss([1.0, 2.0], 0.5, weights=[1.0])


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=30), st.floats(0.01, 0.99))
def test_check_loss_nonnegative(r, tau):
    assert check_loss(r, tau) >= 0.0


def test_two_point_interpolation():
    fit = fit_quantile_regression([[1, 0], [1, 1]], [0, 1], 0.5)
    np.testing.assert_allclose(fit.coefficients, [0.0, 1.0], atol=1e-12)
    assert fit.objective == 0.0


def test_oracle_examples():
    X = [[1.0], [1.0], [1.0]]
    assert brute_force_qr_oracle(X, [2, 4, 6], 0.5).coefficients[0] == pytest.approx(4.0)
    assert brute_force_qr_oracle(X, [2, 4, 6], 0.9).coefficients[0] == pytest.approx(6.0)
    with pytest.raises(ConfigurationError):
        brute_force_qr_oracle(np.ones((15, 1)), np.arange(15.0), 0.5)
    with pytest.raises(DataError):
        brute_force_qr_oracle(np.zeros((5, 1)), np.arange(5.0), 0.5)


def test_oracle_minimum_over_all_basic_solutions(rng):
    import itertools

    X = np.column_stack([np.ones(8), rng.standard_normal(8)])
    y = rng.standard_normal(8)
    best = brute_force_qr_oracle(X, y, 0.4)
    for h in itertools.combinations(range(8), 2):
        coef = np.linalg.solve(X[list(h)], y[list(h)])
        assert best.objective <= check_loss(y - X @ coef, 0.4) + 1e-12


def test_matches_oracle_n9(rng):
    X = np.column_stack([np.ones(9), rng.standard_normal((9, 2))])
    y = rng.standard_normal(9)
    fit, orc = fit_quantile_regression(X, y, 0.35), brute_force_qr_oracle(X, y, 0.35)
    assert fit.objective == pytest.approx(orc.objective, abs=1e-10)
    if not fit.non_unique:
        np.testing.assert_allclose(fit.coefficients, orc.coefficients, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(4, 12), st.floats(0.05, 0.95), st.booleans())
def test_random_instances_match_oracle(seed, p, n, tau, weighted):
    r = np.random.default_rng(seed)
    X = r.standard_normal((n, p))
    X[:, 0] = 1.0
    y = r.standard_normal(n)
    w = r.uniform(0.1, 2.0, n) if weighted else None
    fit = fit_quantile_regression(X, y, tau, weights=w)
    orc = brute_force_qr_oracle(X, y, tau, weights=w)
    assert fit.certified
    assert fit.objective == pytest.approx(orc.objective, abs=1e-10)


def test_equivariance(rng):
    X = np.column_stack([np.ones(200), rng.standard_normal(200)])
    y = X @ [0.5, -1.0] + rng.standard_normal(200)
    base = fit_quantile_regression(X, y, 0.3)
    double = fit_quantile_regression(X, 2 * y, 0.3)
    np.testing.assert_allclose(double.coefficients, 2 * base.coefficients, atol=1e-10)
    assert double.objective == pytest.approx(2 * base.objective, rel=1e-12)
    b = np.array([1.5, 0.25])
    shifted = fit_quantile_regression(X, 3 * y + X @ b, 0.3)
    np.testing.assert_allclose(shifted.coefficients, 3 * base.coefficients + b, atol=1e-9)


def test_residual_sign_fractions_and_certificate(rng):
    n, p, tau = 300, 3, 0.7
    X = np.column_stack([np.ones(n), rng.standard_normal((n, 2))])
    y = rng.standard_t(3, n)
    fit = fit_quantile_regression(X, y, tau)
    np.testing.assert_allclose(fit.residuals, y - X @ fit.coefficients, atol=1e-12)
    assert fit.objective == pytest.approx(check_loss(fit.residuals, tau))
    assert fit.exact_fit_count >= p
    neg, nonpos = np.mean(fit.residuals < -1e-12), np.mean(fit.residuals <= 1e-12)
    assert tau - p / n - 1e-12 <= neg <= tau + 1e-12
    assert tau - 1e-12 <= nonpos <= tau + p / n + 1e-12
    assert np.all(subgradient_gap(X, fit.residuals, tau) <= 1e-9)


def test_rank_deficient_design_rejected():
    X = np.column_stack([np.ones(10), np.ones(10)])
    with pytest.raises(DataError):
        fit_quantile_regression(X, np.arange(10.0), 0.5)


def test_smoothed_indicator_examples():
    h = 0.7
    assert smoothed_indicator(0.0, h) == 0.5
    assert smoothed_indicator(-2 * h, h) == 1.0
    assert smoothed_indicator(h / 2, h) == pytest.approx(0.103515625, abs=1e-15)
    u = np.linspace(-3, 3, 601)
    g = smoothed_indicator(u, h)
    assert np.all(np.diff(g) <= 0)
    far = np.abs(u) >= h
    np.testing.assert_array_equal(g[far], (u[far] <= 0).astype(float))
    with pytest.raises(ConfigurationError):
        smoothed_indicator(0.0, 0.0)


def test_self_weighted_qr_first_order_condition():
    s = make_sample(n=400, beta=0.3, c=-2)
    fit = self_weighted_qr(s, 0.5)
    assert fit.coefficients.shape == (2,)
    assert abs(fit.coefficients[1] - 0.3) < 0.1
    assert fit.extra["cov"].shape == (2, 2) and fit.extra["density_at_zero"] > 0
    dyn = self_weighted_qr(s, 0.5, dynamic=True)
    assert dyn.coefficients.shape == (3,)
