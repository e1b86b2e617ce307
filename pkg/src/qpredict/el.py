"""Split-sample self-weighted empirical likelihood for quantile predictive regression.

The sample ``t = 1..2m`` (``m = n // 2``) is split into two blocks. Row ``i``
of the score panel pairs the intercept score from the first block with the
slope scores from the second block::

    Z_i = ( psi(e_i - a),
            psi(e_{m+i} - a) * w_{m+i},
            psi(e_{m+i} - a) * wt_{m+i} )

where ``e_t = y_t - b x_{t-1} - g y_{t-1}``, ``w_t = x_{t-1}/sqrt(1+x_{t-1}^2)``
and ``wt_t = y_{t-1} - b x_{t-1}``. The last column is present only for the
dynamic model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core_stats import (
    DistributionRef,
    TauLike,
    TestResult,
    as_tau,
    chi_square_quantile,
)
from .exceptions import ConfigurationError, DataError, DegenerateRegressorError
from .qr import self_weighted_qr, smoothed_indicator

MIN_N = 40
NEWTON_MAX_ITER = 50
NEWTON_TOL = 1e-10
PROFILE_EXACT = 6  # breakpoints evaluated exactly after the quadratic screen
PROFILE_WINDOW = 5.0  # in standard errors of the block-one exceedance rate

HYPOTHESES = ("joint", "beta_only", "gamma_only")


def split_indices(n: int, min_n: int = MIN_N):
    """Return ``(block1, block2, m)`` as 1-based inclusive ``range`` objects.

    With odd ``n`` the last observation belongs to neither block.
    """
    if n < min_n:
        raise DataError(f"split-sample inference needs n >= {min_n}, got {n}")
    m = n // 2
    return range(1, m + 1), range(m + 1, 2 * m + 1), m


@dataclass
class ScorePanel:
    z: np.ndarray
    block1: range
    block2: range
    m: int
    columns: tuple = ("alpha", "beta", "gamma")


@dataclass
class LambdaSolution:
    lam: np.ndarray
    converged: bool
    degenerate: bool = False
    iterations: int = 0
    gradient_norm: float = 0.0


@dataclass
class ElResult:
    statistic: float
    lam: np.ndarray
    converged: bool
    dof: int
    p_value: float
    alpha: float = float("nan")
    scores: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def weights(self) -> np.ndarray:
        """EL probabilities ``p_t = 1 / (n' (1 + lam'Z_t))``."""
        nn = self.scores.shape[0]
        return 1.0 / (nn * (1.0 + self.scores @ self.lam))


# ---------------------------------------------------------------------------
# inner problem


def _log_star(y, eps):
    """Owen's pseudo-logarithm and its first two derivatives."""
    lo = y < eps
    ys = np.where(lo, eps, y)
    f = np.where(lo, math.log(eps) - 1.5 + 2.0 * y / eps - 0.5 * (y / eps) ** 2, np.log(ys))
    d1 = np.where(lo, 2.0 / eps - y / eps**2, 1.0 / ys)
    d2 = np.where(lo, -1.0 / eps**2, -1.0 / ys**2)
    return f, d1, d2


def _solve_lambda_batch(z: np.ndarray, max_iter: int = NEWTON_MAX_ITER, tol: float = NEWTON_TOL):
    """Damped Newton ascent of ``sum log*(1 + lam'z_t)`` for a stack of panels.

    ``z`` has shape ``(K, n, d)``. Returns ``(lam, converged, gnorm, iters)``.
    """
    K, n, d = z.shape
    eps = 1.0 / n
    lam = np.zeros((K, d))
    scale = max(1.0, float(np.abs(z).max(initial=0.0)))
    gtol = tol * scale
    arg = np.ones((K, n))
    fval, d1, d2 = _log_star(arg, eps)
    F = fval.sum(axis=1)
    done = np.zeros(K, dtype=bool)
    gnorm = np.zeros(K)
    it = 0
    for it in range(1, max_iter + 1):
        g = np.einsum("kn,knd->kd", d1, z)
        gnorm = np.abs(g).max(axis=1)
        done |= gnorm <= gtol
        if done.all():
            break
        act = ~done
        za = z[act]
        H = np.einsum("kn,kni,knj->kij", d2[act], za, za)
        step = np.einsum("kij,kj->ki", np.linalg.pinv(-H), g[act])
        lam_a, F_a = lam[act], F[act]
        new_lam = lam_a.copy()
        new_arg = arg[act].copy()
        new_F = F_a.copy()
        pending = np.ones(lam_a.shape[0], dtype=bool)
        s = 1.0
        for _ in range(40):
            cand = lam_a[pending] + s * step[pending]
            carg = 1.0 + np.einsum("knd,kd->kn", za[pending], cand)
            cF = _log_star(carg, eps)[0].sum(axis=1)
            # rounding tolerance: near the optimum the dual is flat to machine precision
            ok = cF >= F_a[pending] - 1e-12 * np.maximum(1.0, np.abs(F_a[pending]))
            idx = np.flatnonzero(pending)[ok]
            new_lam[idx], new_arg[idx], new_F[idx] = cand[ok], carg[ok], cF[ok]
            pending[idx] = False
            if not pending.any():
                break
            s *= 0.5
        # a step that cannot increase the dual means we are at machine precision
        stalled = np.flatnonzero(act)[pending]
        lam[act], arg[act], F[act] = new_lam, new_arg, new_F
        if stalled.size:
            done[stalled] = True
        _, d1a, d2a = _log_star(arg[act], eps)
        d1[act], d2[act] = d1a, d2a
    g = np.einsum("kn,knd->kd", d1, z)
    gnorm = np.abs(g).max(axis=1)
    inside = (arg >= eps).all(axis=1)
    # sum_t p_t = 1 - lam'g / n; fails when lam escapes to infinity (0 outside the hull)
    mass_gap = np.abs(np.einsum("kd,kd->k", lam, g)) / n
    converged = inside & (gnorm <= max(gtol, 1e-8 * scale)) & (mass_gap <= 1e-9)
    return lam, converged, gnorm, it


def _solve_lambda_single(z: np.ndarray, max_iter: int = NEWTON_MAX_ITER, tol: float = NEWTON_TOL):
    """Unbatched twin of :func:`_solve_lambda_batch` for one ``(n, d)`` panel."""
    n, d = z.shape
    eps = 1.0 / n
    log_eps = math.log(eps)
    scale = max(1.0, float(np.abs(z).max(initial=0.0)))
    gtol = tol * scale
    lam = np.zeros(d)
    arg = np.ones(n)
    F = 0.0
    it = 0

    def fval(a):
        if a.min() >= eps:
            return float(np.log(a).sum())
        lo = a < eps
        return float(np.log(a[~lo]).sum() + (log_eps - 1.5 + 2.0 * a[lo] / eps - 0.5 * (a[lo] / eps) ** 2).sum())

    for it in range(1, max_iter + 1):
        if arg.min() >= eps:
            d1 = 1.0 / arg
            d2 = d1 * d1
        else:
            _, d1, d2 = _log_star(arg, eps)
            d2 = -d2
        g = d1 @ z
        if np.abs(g).max() <= gtol:
            break
        H = (z * d2[:, None]).T @ z
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = np.linalg.pinv(H) @ g
        s = 1.0
        accepted = False
        for _ in range(40):
            cand = lam + s * step
            carg = 1.0 + z @ cand
            cF = fval(carg)
            if cF >= F - 1e-12 * max(1.0, abs(F)):
                lam, arg, F = cand, carg, cF
                accepted = True
                break
            s *= 0.5
        if not accepted:
            break
    _, d1, _ = _log_star(arg, eps)
    g = d1 @ z
    gnorm = float(np.abs(g).max())
    converged = bool(arg.min() >= eps and gnorm <= max(gtol, 1e-8 * scale) and abs(lam @ g) / n <= 1e-9)
    return lam, converged, gnorm, it


def solve_lambda(z) -> LambdaSolution:
    """Lagrange multiplier of the EL inner problem for the rows of ``z``.

    ``converged`` is False when zero lies outside (or on the boundary of) the
    convex hull of the rows; in that case no valid EL weights exist.
    """
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if z.shape[0] == 0:
        raise DataError("score matrix is empty")
    if not np.any(z):
        return LambdaSolution(lam=np.zeros(z.shape[1]), converged=True, degenerate=True)
    lam, conv, gnorm, it = _solve_lambda_single(z)
    return LambdaSolution(lam=lam, converged=conv, iterations=it, gradient_norm=gnorm)


def _stat_from(z, lam, conv):
    """``2 sum log(1 + lam'z)`` for batched panels; ``inf`` where not converged."""
    arg = 1.0 + np.einsum("knd,kd->kn", z, lam)
    with np.errstate(divide="ignore", invalid="ignore"):
        stat = 2.0 * np.log(np.where(arg > 0, arg, np.nan)).sum(axis=1)
    stat = np.where(conv, np.maximum(stat, 0.0), np.inf)
    return stat


def el_statistic(z):
    """EL log-ratio for a score matrix whose rows should have mean zero.

    Returns ``(statistic, LambdaSolution)``.
    """
    sol = solve_lambda(z)
    z = np.asarray(z, dtype=float)
    if z.ndim == 1:
        z = z[:, None]
    if sol.degenerate:
        return 0.0, sol
    stat = _stat_from(z[None], sol.lam[None], np.array([sol.converged]))[0]
    return float(stat), sol


def score_covariance(z) -> np.ndarray:
    """Sample second-moment matrix ``(1/n') sum Z_t Z_t'`` of the scores."""
    z = np.asarray(z, dtype=float)
    return z.T @ z / z.shape[0]


# ---------------------------------------------------------------------------
# score construction


def _psi(e, tau, smoothing):
    if smoothing is None:
        return tau - (e <= 0.0)
    return tau - smoothed_indicator(e, smoothing)


def _ingredients(sample, beta, gamma_lag):
    """Residual-before-intercept ``e_t`` and weights for ``t = 1..2m``."""
    _, _, m = split_indices(sample.n)
    xl = sample.x_lag[: 2 * m]
    yl = sample.y_lag[: 2 * m]
    e = sample.y[: 2 * m] - beta * xl
    if gamma_lag is not None:
        e = e - gamma_lag * yl
    w = xl / np.sqrt(1.0 + xl * xl)
    wt = yl - beta * xl
    return e, w, wt, m


def score_panel(sample, tau: TauLike, alpha: float, beta: float, gamma_lag: Optional[float] = None,
                smoothing: Optional[float] = None) -> ScorePanel:
    """Per-observation scores at ``(alpha, beta, gamma_lag)``.

    ``gamma_lag=None`` selects the static model (two columns). ``smoothing``
    replaces the indicator by its integrated-biweight smoothing with that
    bandwidth.
    """
    t = as_tau(tau)
    vals = [alpha, beta] + ([] if gamma_lag is None else [gamma_lag])
    if not all(math.isfinite(v) for v in vals):
        raise ConfigurationError("coefficients must be finite")
    e, w, wt, m = _ingredients(sample, beta, gamma_lag)
    b1, b2, _ = split_indices(sample.n)
    p1 = _psi(e[:m] - alpha, t, smoothing)
    p2 = _psi(e[m:] - alpha, t, smoothing)
    cols = [p1, p2 * w[m:]]
    names = ("alpha", "beta")
    if gamma_lag is not None:
        cols.append(p2 * wt[m:])
        names = names + ("gamma",)
    return ScorePanel(z=np.column_stack(cols), block1=b1, block2=b2, m=m, columns=names)


def _intercept_candidates(e, w, wt, m, tau, dynamic):
    """Intercept breakpoints near the block-one quantile with their score means.

    The scores are step functions of the intercept that change only at the
    values ``e_t``; each breakpoint represents the interval to its right.
    Returns ``(candidates, zbar, V, dvec)`` where ``zbar[k]`` is the mean
    score row at candidate ``k``, ``V`` the score second moment at the
    block-one quantile and ``dvec`` the direction (up to the density
    factor) in which the mean scores move with the intercept.
    """
    e1, e2 = e[:m], e[m:]
    w2, wt2 = w[m:], wt[m:]
    s1 = np.sort(e1)
    se = math.sqrt(tau * (1 - tau) / m)
    lo_rate = max(tau - PROFILE_WINDOW * se - 1.0 / m, 1.0 / m)
    hi_rate = min(tau + PROFILE_WINDOW * se + 1.0 / m, 1.0 - 1.0 / m)
    lo = s1[max(int(math.floor(lo_rate * m)) - 1, 0)]
    hi = s1[min(int(math.ceil(hi_rate * m)), m - 1)]
    allv = np.concatenate([e1, e2])
    q1 = s1[max(int(math.ceil(tau * m)) - 1, 0)]
    cand = np.unique(np.concatenate([allv[(allv >= lo) & (allv <= hi)], [q1]]))

    cnt1 = np.searchsorted(s1, cand, side="right")
    order = np.argsort(e2, kind="stable")
    k2 = np.searchsorted(e2[order], cand, side="right")
    cw = np.concatenate([[0.0], np.cumsum(w2[order])])
    zbar = [tau - cnt1 / m, (tau * w2.sum() - cw[k2]) / m]
    dvec = [1.0, w2.mean()]
    if dynamic:
        cwt = np.concatenate([[0.0], np.cumsum(wt2[order])])
        zbar.append((tau * wt2.sum() - cwt[k2]) / m)
        dvec.append(wt2.mean())
    zbar = np.column_stack(zbar)

    z0 = _panel_at(e1, e2, w2, wt2, q1, tau, dynamic)
    V = z0.T @ z0 / m
    return cand, zbar, V, np.array(dvec)


def _panel_at(e1, e2, w2, wt2, a, tau, dynamic):
    p1 = tau - (e1 <= a)
    p2 = tau - (e2 <= a)
    cols = [p1, p2 * w2] + ([p2 * wt2] if dynamic else [])
    return np.column_stack(cols)


def _efficient_alpha(cand, zbar, V, dvec):
    """Breakpoint where ``dvec' V^{-1} zbar(a)`` changes sign.

    This combination is the first-order condition of the profiled
    statistic; solving it instead of minimizing avoids selecting on the
    roughness of the step-function scores.
    """
    g = zbar @ np.linalg.pinv(V) @ dvec
    neg = np.flatnonzero(g < 0)
    if neg.size == 0:
        return cand[-1]
    k = int(neg[0])
    if k == 0:
        return cand[0]
    return cand[k] if abs(g[k]) < abs(g[k - 1]) else cand[k - 1]


def _profile_alpha(e, w, wt, m, tau, dynamic, mode="efficient"):
    cand, zbar, V, dvec = _intercept_candidates(e, w, wt, m, tau, dynamic)
    e1, e2, w2, wt2 = e[:m], e[m:], w[m:], wt[m:]
    if mode == "efficient":
        alphas = np.array([_efficient_alpha(cand, zbar, V, dvec)])
    else:
        proxy = m * np.einsum("kd,de,ke->k", zbar, np.linalg.pinv(V), zbar)
        alphas = cand[np.argsort(proxy, kind="stable")[:PROFILE_EXACT]]
    best = None
    for a in alphas:
        z = _panel_at(e1, e2, w2, wt2, a, tau, dynamic)
        stat, sol = el_statistic(z)
        if best is None or stat < best[0]:
            best = (stat, sol.lam, sol.converged, float(a), z)
    return best


def block_quantile_alpha(sample, tau: TauLike, beta: float, gamma_lag: Optional[float] = None) -> float:
    """Block-one ``tau``-quantile of ``y_t - beta x_{t-1} - gamma y_{t-1}`` (an order statistic)."""
    t = as_tau(tau)
    e, _, _, m = _ingredients(sample, beta, gamma_lag)
    s1 = np.sort(e[:m])
    return float(s1[max(int(math.ceil(t * m)) - 1, 0)])


def el_log_ratio(sample, tau: TauLike, beta0: float, gamma0: Optional[float] = None,
                 alpha: Optional[float] = None, intercept: str = "efficient") -> ElResult:
    """EL log-ratio statistic at ``(beta0, gamma0)``.

    Parameters
    ----------
    intercept : {"efficient", "profile", "block_quantile"}
        How the unknown intercept is handled when ``alpha`` is not supplied.
        ``"efficient"`` (default) keeps all score columns and picks the
        intercept breakpoint where the efficient combination of mean scores
        changes sign. ``"profile"`` minimizes the statistic over nearby
        breakpoints. ``"block_quantile"`` fixes the intercept at the
        block-one quantile and uses only the slope columns; it over-rejects
        in finite samples and is kept for comparison.
    alpha : float, optional
        Known intercept. All score columns are then tested and the degrees
        of freedom equal the number of columns.
    """
    t = as_tau(tau)
    dynamic = gamma0 is not None
    e, w, wt, m = _ingredients(sample, beta0, gamma0)
    ncol = 3 if dynamic else 2

    if alpha is not None:
        z = score_panel(sample, t, alpha, beta0, gamma0).z
        stat, sol = el_statistic(z)
        dof, lam, conv, a = ncol, sol.lam, sol.converged, float(alpha)
    elif intercept in ("efficient", "profile"):
        stat, lam, conv, a, z = _profile_alpha(e, w, wt, m, t, dynamic, intercept)
        dof = ncol - 1
    elif intercept == "block_quantile":
        a = block_quantile_alpha(sample, t, beta0, gamma0)
        z = score_panel(sample, t, a, beta0, gamma0).z[:, 1:]
        stat, sol = el_statistic(z)
        dof, lam, conv = ncol - 1, sol.lam, sol.converged
    else:
        raise ConfigurationError(f"unknown intercept handling {intercept!r}")
    p = 0.0 if not math.isfinite(stat) else DistributionRef(dof=dof).sf(stat)
    return ElResult(statistic=float(stat), lam=lam, converged=bool(conv), dof=dof, p_value=p, alpha=a, scores=z)


def _golden_min(f, lo, hi, tol, max_iter=60):
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def _profile_nuisance(f, centre, se, grid_points=41):
    """Minimize a piecewise-constant profile over ``centre +/- 5 se``.

    A coarse grid locates the basin; golden-section search refines inside
    the neighbouring grid cells.
    """
    if not (math.isfinite(se) and se > 0):
        se = max(abs(centre), 1.0) * 0.1
    lo, hi = centre - 5 * se, centre + 5 * se
    grid = np.linspace(lo, hi, grid_points)
    vals = np.array([f(v) for v in grid])
    k = int(np.argmin(vals))
    best_x, best_v = float(grid[k]), float(vals[k])
    step = grid[1] - grid[0]
    x, v = _golden_min(f, max(lo, best_x - step), min(hi, best_x + step), tol=step * 1e-3)
    if v < best_v:
        best_x, best_v = x, v
    return best_x, best_v, bool(np.isfinite(best_v))


def _check_regressor(sample):
    xl = sample.x_lag
    if np.ptp(xl) == 0.0:
        raise DegenerateRegressorError("degenerate regressor: x has no variation")


def el_test(sample, tau: TauLike, hypothesis: str = "joint", dynamic: bool = True,
            intercept: str = "efficient", beta0: float = 0.0, gamma0: float = 0.0) -> TestResult:
    """EL test of no predictability at quantile level ``tau``.

    ``hypothesis="joint"`` tests ``beta = gamma = 0`` in the dynamic model
    (``beta = 0`` in the static model); ``"beta_only"`` and ``"gamma_only"``
    profile the other slope out.
    """
    t = as_tau(tau)
    if hypothesis not in HYPOTHESES:
        raise ConfigurationError(f"unknown hypothesis {hypothesis!r}")
    if not dynamic and hypothesis == "gamma_only":
        raise ConfigurationError("gamma_only requires the dynamic model")
    if hypothesis in ("joint", "beta_only"):
        _check_regressor(sample)

    diagnostics = {}
    if not dynamic or hypothesis == "joint":
        res = el_log_ratio(sample, t, beta0, gamma0 if dynamic else None, intercept=intercept)
        estimates = {"alpha": res.alpha}
        converged = res.converged
    else:
        fit = self_weighted_qr(sample, t, dynamic=True)
        j = 2 if hypothesis == "beta_only" else 1
        centre = float(fit.coefficients[j])
        se = float(np.sqrt(fit.extra["cov"][j, j]))
        if hypothesis == "beta_only":
            f = lambda g: el_log_ratio(sample, t, beta0, g, intercept=intercept).statistic
        else:
            f = lambda b: el_log_ratio(sample, t, b, gamma0, intercept=intercept).statistic
        nuis, _, ok = _profile_nuisance(f, centre, se)
        if hypothesis == "beta_only":
            res = el_log_ratio(sample, t, beta0, nuis, intercept=intercept)
            estimates = {"alpha": res.alpha, "gamma": nuis}
        else:
            res = el_log_ratio(sample, t, nuis, gamma0, intercept=intercept)
            estimates = {"alpha": res.alpha, "beta": nuis}
        converged = ok and res.converged
        diagnostics["profile_centre"] = centre
        diagnostics["profile_se"] = se
        res.dof = 1
        res.p_value = 0.0 if not math.isfinite(res.statistic) else DistributionRef(dof=1).sf(res.statistic)

    if dynamic:
        wt = sample.y_lag - beta0 * sample.x_lag
        diagnostics["max_abs_wtilde"] = float(np.abs(wt).max())
    return TestResult(
        statistic=res.statistic,
        reference=DistributionRef(dof=res.dof),
        p_value=res.p_value,
        method="el",
        hypothesis=hypothesis,
        converged=converged,
        estimates=estimates,
        diagnostics=diagnostics,
    )


def el_confidence_region(sample, tau: TauLike, grid: Sequence, level: float = 0.95,
                         intercept: str = "efficient") -> list:
    """Grid points ``(beta, gamma)`` (or scalar ``beta``) not rejected at ``level``.

    Points are tuples ``(beta, gamma)`` for the dynamic model; scalars select
    the static model.
    """
    pts = list(grid)
    if not pts:
        raise ConfigurationError("confidence-region grid is empty")
    t = as_tau(tau)
    keep = []
    for pt in pts:
        if np.ndim(pt) == 0:
            res = el_log_ratio(sample, t, float(pt), None, intercept=intercept)
        else:
            b, g = pt
            res = el_log_ratio(sample, t, float(b), float(g), intercept=intercept)
        if res.statistic <= chi_square_quantile(level, res.dof):
            keep.append(pt)
    return keep
