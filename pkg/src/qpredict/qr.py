"""Linear quantile regression by exact check-loss minimization."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy import linalg, optimize

from .core_stats import TauLike, as_tau
from .exceptions import ConfigurationError, DataError, NumericalError

ORACLE_MAX_N = 14


@dataclass
class QuantileFit:
    """Result of a quantile regression fit.

    Coefficients follow the column order of the design (intercept, lagged
    regressor, optional lagged predictand for the models in this package).
    """

    coefficients: np.ndarray
    residuals: np.ndarray
    tau: float
    objective: float
    exact_fit_count: int
    basis: Optional[tuple] = None
    certified: bool = True
    non_unique: bool = False
    extra: dict = field(default_factory=dict)


def check_loss(residuals, tau: TauLike, weights=None) -> float:
    """Weighted check loss ``sum w_t r_t (tau - 1{r_t <= 0})``."""
    t = as_tau(tau)
    r = np.asarray(residuals, dtype=float)
    terms = r * (t - (r <= 0))
    if weights is None:
        return float(np.sum(terms))
    w = np.asarray(weights, dtype=float)
    if w.shape != r.shape:
        raise DataError(f"weights shape {w.shape} does not match residuals {r.shape}")
    return float(np.sum(w * terms))


def _prepare(design, response, weights):
    X = np.atleast_2d(np.asarray(design, dtype=float))
    if X.shape[0] == 1 and np.ndim(design) == 1:
        X = X.T
    y = np.asarray(response, dtype=float).ravel()
    n, p = X.shape
    if y.size != n:
        raise DataError(f"design has {n} rows but response has {y.size} entries")
    if weights is None:
        w = np.ones(n)
    else:
        w = np.asarray(weights, dtype=float).ravel()
        if w.size != n or np.any(w < 0) or not np.all(np.isfinite(w)):
            raise DataError("weights must be finite, nonnegative and match the response length")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("design and response must be finite")
    return X, y, w


def _check_rank(X):
    _, r, _ = linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[-1] <= 1e-12 * max(diag[0], 1.0) or X.shape[1] > X.shape[0]:
        raise DataError("design matrix is rank deficient")


def _zero_tol(X, y, coef):
    scale = np.abs(y).max(initial=0.0) + np.abs(X).max(initial=0.0) * np.abs(coef).max(initial=0.0)
    return 1e-9 * max(scale, 1.0)


def subgradient_gap(design, residuals, tau: TauLike, weights=None, zero_tol=None) -> np.ndarray:
    """Per-column excess of the score over the slack interpolated points absorb.

    A fit satisfies the first-order optimality check when every entry is
    ``<= 0`` (up to rounding). Residuals with ``|r| <= zero_tol`` are treated
    as interpolated.
    """
    t = as_tau(tau)
    X = np.asarray(design, dtype=float)
    r = np.asarray(residuals, dtype=float)
    w = np.ones(r.size) if weights is None else np.asarray(weights, dtype=float)
    if zero_tol is None:
        zero_tol = 1e-9 * max(np.abs(r).max(initial=0.0), 1.0)
    on = np.abs(r) <= zero_tol
    psi = t - (r < 0)
    score = np.abs((w * psi * ~on) @ X)
    slack = (w * on) @ np.abs(X) * max(t, 1.0 - t)
    return score - slack


def _basic_dual(X, y, w, tau, basis):
    """Dual multipliers of a basic solution; optimal iff within ``[(tau-1) w_h, tau w_h]``."""
    h = np.asarray(basis)
    Xh = X[h]
    coef = np.linalg.solve(Xh, y[h])
    r = y - X @ coef
    r[h] = 0.0
    mask = np.ones(y.size, dtype=bool)
    mask[h] = False
    g = (w[mask] * (tau - (r[mask] < 0))) @ X[mask]
    lam = -np.linalg.solve(Xh.T, g)
    return coef, lam


def _snap_to_basis(X, y, coef, tol):
    """Pick ``p`` near-interpolated rows forming a nonsingular square system."""
    n, p = X.shape
    order = np.argsort(np.abs(y - X @ coef), kind="stable")
    chosen = []
    for i in order:
        trial = chosen + [int(i)]
        if np.linalg.matrix_rank(X[trial], tol=1e-10 * max(1.0, np.abs(X[trial]).max())) == len(trial):
            chosen = trial
        if len(chosen) == p:
            break
    if len(chosen) < p:
        return None
    return tuple(sorted(chosen))


def fit_quantile_regression(design, response, tau: TauLike, weights=None) -> QuantileFit:
    """Minimize the (weighted) check loss of ``response - design @ coef``.

    The linear program is solved with the HiGHS dual simplex, which returns a
    vertex; the vertex is then recovered exactly from its interpolated rows and
    certified with the basic-solution dual feasibility conditions.
    """
    t = as_tau(tau)
    X, y, w = _prepare(design, response, weights)
    n, p = X.shape
    if n < p:
        raise DataError("need at least as many observations as parameters")
    _check_rank(X)

    c = np.concatenate([np.zeros(p), t * w, (1.0 - t) * w])
    A = np.hstack([X, np.eye(n), -np.eye(n)])
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    res = optimize.linprog(c, A_eq=A, b_eq=y, bounds=bounds, method="highs-ds")
    if res.status == 3:
        raise NumericalError("check-loss objective unbounded below")
    if res.status != 0:
        raise NumericalError(f"LP solver failed: {res.message}")
    lp_coef = res.x[:p]
    lp_obj = check_loss(y - X @ lp_coef, t, w)

    coef, basis, lam = lp_coef, None, None
    snap = _snap_to_basis(X, y, lp_coef, _zero_tol(X, y, lp_coef))
    if snap is not None:
        try:
            cand, lam_c = _basic_dual(X, y, w, t, snap)
        except np.linalg.LinAlgError:
            cand = None
        if cand is not None and check_loss(y - X @ cand, t, w) <= lp_obj + 1e-9 * max(1.0, abs(lp_obj)):
            coef, basis, lam = cand, snap, lam_c

    resid = y - X @ coef
    if basis is not None:
        resid[list(basis)] = 0.0
    obj = check_loss(resid, t, w)
    ztol = _zero_tol(X, y, coef)
    exact = int(np.sum(np.abs(resid) <= ztol))

    certified, non_unique = False, False
    if lam is not None:
        wh = w[list(basis)]
        eps = 1e-9 * max(1.0, wh.max(initial=1.0))
        lo, hi = (t - 1.0) * wh, t * wh
        certified = bool(np.all(lam >= lo - eps) and np.all(lam <= hi + eps))
        non_unique = bool(np.any(np.abs(lam - lo) <= eps) or np.any(np.abs(lam - hi) <= eps))
    if not certified:
        certified = bool(np.all(subgradient_gap(X, resid, t, w, ztol) <= 1e-8 * max(1.0, w.sum())))
    return QuantileFit(
        coefficients=coef, residuals=resid, tau=t, objective=obj,
        exact_fit_count=exact, basis=basis, certified=certified, non_unique=non_unique,
    )


def brute_force_qr_oracle(design, response, tau: TauLike, weights=None) -> QuantileFit:
    """Enumerate every exact-fit basic solution and keep the best one.

    Only intended for small problems (``n <= 14``). Ties go to the
    lexicographically smallest index set.
    """
    t = as_tau(tau)
    X, y, w = _prepare(design, response, weights)
    n, p = X.shape
    if n > ORACLE_MAX_N:
        raise ConfigurationError(f"oracle enumeration limited to n <= {ORACLE_MAX_N}")
    best = None
    for h in itertools.combinations(range(n), p):
        Xh = X[list(h)]
        if abs(np.linalg.det(Xh)) <= 1e-12 * max(1.0, np.abs(Xh).max()) ** p:
            continue
        coef = np.linalg.solve(Xh, y[list(h)])
        r = y - X @ coef
        r[list(h)] = 0.0
        obj = check_loss(r, t, w)
        if best is None or obj < best[0]:
            best = (obj, h, coef, r)
    if best is None:
        raise DataError("every p-subset of the design is singular")
    obj, h, coef, r = best
    return QuantileFit(
        coefficients=coef, residuals=r, tau=t, objective=obj,
        exact_fit_count=int(np.sum(np.abs(r) <= _zero_tol(X, y, coef))), basis=h,
    )


def integrated_biweight(s):
    """CDF of the biweight kernel on ``[-1, 1]``."""
    s = np.asarray(s, dtype=float)
    c = np.clip(s, -1.0, 1.0)
    out = 0.5 + (15.0 / 16.0) * (c - (2.0 / 3.0) * c**3 + 0.2 * c**5)
    # exact saturation; the polynomial leaves rounding error at the ends
    out = np.where(s >= 1.0, 1.0, np.where(s <= -1.0, 0.0, out))
    return float(out) if out.ndim == 0 else out


def smoothed_indicator(u, h: float):
    """Smooth stand-in for ``1{u <= 0}``: ``G(-u / h)`` with the integrated biweight ``G``."""
    if not h > 0:
        raise ConfigurationError(f"smoothing bandwidth must be positive, got {h!r}")
    return integrated_biweight(-np.asarray(u, dtype=float) / h)


def default_smoothing_bandwidth(n: int, p: int) -> float:
    return (p + 1) / n ** (1.0 / 3.0)


def self_weighted_qr(sample, tau: TauLike, dynamic: bool = False) -> QuantileFit:
    """Quantile regression of ``y_t`` on ``(1, x_{t-1}[, y_{t-1}])`` with weights ``1/sqrt(1+x_{t-1}^2)``.

    With these weights the slope's first-order condition is the self-weighted
    score ``psi(r_t) * x_{t-1} / sqrt(1 + x_{t-1}^2)``. A sandwich covariance
    (Gaussian-kernel sparsity at zero) is attached as ``extra["cov"]``.
    """
    from .core_stats import density_at_zero

    t = as_tau(tau)
    X = sample.design(dynamic)
    c = 1.0 / np.sqrt(1.0 + sample.x_lag**2)
    fit = fit_quantile_regression(X, sample.y, t, weights=c)
    f0 = density_at_zero(fit.residuals, tau=t)
    H = f0 * (X * c[:, None]).T @ X
    G = (X * (c * c)[:, None]).T @ X
    try:
        Hinv = np.linalg.inv(H)
        fit.extra["cov"] = t * (1 - t) * Hinv @ G @ Hinv.T
    except np.linalg.LinAlgError:
        fit.extra["cov"] = np.full((X.shape[1], X.shape[1]), np.nan)
    fit.extra["density_at_zero"] = f0
    return fit
