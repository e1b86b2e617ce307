"""Numerical checks of the split-sample asymptotics.

Three groups of diagnostics live here: the stationary-case limit matrices
of the split-sample estimator, the local linearization of the normalized
score vector ``Z_m(v)``, and Ornstein-Uhlenbeck functionals that arise as
limits of scaled near-integrated paths.

Split-sample estimator
----------------------
With ``m = n // 2`` the estimator ``(alpha_hat, beta_hat)`` solves

* ``sum_{t<=m}   psi(y_t - alpha - beta x_{t-1})       = 0``
* ``sum_{t>m}    psi(y_t - alpha - beta x_{t-1}) w_t   = 0``

so its Jacobian is ``D_{1,m}`` below and the slope row of ``D^{-1}`` is
``(-E w, 1) / A_{1,m}`` with ``A_{1,m} = f (E[w x] - E[x] E[w])``.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .core_stats import TauLike, as_tau, density_at_zero, self_weight
from .dgp import DgpConfig, simulate_system, standardized_quantile
from .exceptions import ConfigurationError, DataError

MIN_BLOCK = 20
MAX_FIXED_POINT_ITER = 100


@dataclass
class StationaryLimitObjects:
    d1m: np.ndarray
    sigma1: np.ndarray
    a1m: float
    gamma1: np.ndarray
    f_hat: float
    alpha_hat: float
    singular: bool

    @property
    def slope_variance(self) -> float:
        """``gamma1' Sigma1 gamma1``, the limit variance of ``A sqrt(m) (beta_hat - beta)``."""
        return float(self.gamma1 @ self.sigma1 @ self.gamma1)


@dataclass
class OuPath:
    c: float
    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.values[0] != 0.0:
            raise ValueError("OU path must start at zero")
        if not np.all(np.diff(self.grid) > 0) or self.grid[0] != 0.0 or self.grid[-1] != 1.0:
            raise ValueError("grid must increase strictly from 0 to 1")

    def half_time_average(self) -> float:
        """``int_0^1 J(r/2) dr = 2 int_0^{1/2} J(s) ds`` by the left-point rule."""
        k = (self.values.size - 1) // 2
        return float(2.0 * self.values[:k].sum() / (self.values.size - 1))


def _blocks(n):
    m = n // 2
    if m < MIN_BLOCK:
        raise DataError(f"split too small: each block needs at least {MIN_BLOCK} observations, got {m}")
    return m


def _tau_quantile(values, tau):
    s = np.sort(values)
    return float(s[max(int(math.ceil(tau * s.size)) - 1, 0)])


def _weighted_slope_root(r, x, w, tau):
    """Smallest ``b`` with ``sum psi(r_t - b x_t) w_t <= 0``.

    The map is nonincreasing in ``b`` and drops by ``|w_t|`` as ``b`` passes
    the breakpoint ``r_t / x_t``.
    """
    keep = x != 0.0
    r, x, w = r[keep], x[keep], w[keep]
    if r.size == 0:
        raise DataError("degenerate regressor: no nonzero lagged values in the second block")
    level = tau * np.abs(w[x > 0]).sum() + (1.0 - tau) * np.abs(w[x < 0]).sum()
    bp = r / x
    order = np.argsort(bp, kind="stable")
    cum = np.cumsum(np.abs(w[order]))
    k = int(np.searchsorted(cum, level - 1e-12 * cum[-1]))
    return float(bp[order[min(k, bp.size - 1)]])


def split_sample_estimator(sample, tau: TauLike) -> tuple[float, float]:
    """Solve the two split-sample estimating equations by alternating updates.

    The intercept is the block-one ``tau``-quantile of ``y - beta x_{t-1}``;
    the slope is the root of the block-two self-weighted score. Iteration
    stops at a fixed point or after a fixed number of sweeps.
    """
    t = as_tau(tau)
    m = _blocks(sample.n)
    y, xl = sample.y, sample.x_lag
    y1, x1, y2, x2 = y[:m], xl[:m], y[m:2 * m], xl[m:2 * m]
    w2 = self_weight(x2)
    beta = 0.0
    alpha = _tau_quantile(y1, t)
    for _ in range(MAX_FIXED_POINT_ITER):
        b_new = _weighted_slope_root(y2 - alpha, x2, w2, t)
        a_new = _tau_quantile(y1 - b_new * x1, t)
        if b_new == beta and a_new == alpha:
            break
        alpha, beta = a_new, b_new
    return alpha, beta


def stationary_limit_objects(sample, tau: TauLike, beta_hat: float) -> StationaryLimitObjects:
    """Plug-in versions of ``D_{1,m}``, ``Sigma_1``, ``A_{1,m}`` and ``gamma_1``.

    Block-one averages enter the intercept column and block-two averages
    the weighted row, matching the estimating equations. ``Sigma_1`` uses
    the full-sample mean of ``x^2 / (1 + x^2)``.
    """
    t = as_tau(tau)
    m = _blocks(sample.n)
    y, xl = sample.y, sample.x_lag
    x1, x2 = xl[:m], xl[m:2 * m]
    w2 = self_weight(x2)
    alpha_hat = _tau_quantile(y[:m] - beta_hat * x1, t)
    resid = y[:2 * m] - alpha_hat - beta_hat * xl[:2 * m]
    f_hat = density_at_zero(resid, tau=t)

    ex1, ew2, ewx2 = float(x1.mean()), float(w2.mean()), float((w2 * x2).mean())
    d1m = f_hat * np.array([[1.0, ex1], [ew2, ewx2]])
    ew2_all = float(np.mean(xl * xl / (1.0 + xl * xl)))
    sigma1 = t * (1.0 - t) * np.diag([1.0, ew2_all])
    a1m = f_hat * (ewx2 - ex1 * ew2)
    gamma1 = np.array([-ew2, 1.0])
    singular = bool(abs(np.linalg.det(d1m)) <= 1e-12 * max(1.0, np.abs(d1m).max() ** 2))
    return StationaryLimitObjects(d1m=d1m, sigma1=sigma1, a1m=a1m, gamma1=gamma1,
                                  f_hat=f_hat, alpha_hat=alpha_hat, singular=singular)


def standardized_slope(sample, tau: TauLike, beta_true: float) -> float:
    """``A_{1,m} sqrt(m) (beta_hat - beta) / sqrt(gamma1' Sigma1 gamma1)``; approximately N(0, 1)."""
    _, beta_hat = split_sample_estimator(sample, tau)
    obj = stationary_limit_objects(sample, tau, beta_hat)
    m = sample.n // 2
    return float(obj.a1m * math.sqrt(m) * (beta_hat - beta_true) / math.sqrt(obj.slope_variance))


def _true_errors(config: DgpConfig, sample, tau):
    if config.beta != 0.0 or config.gamma_lag != 0.0:
        raise ConfigurationError("linearization check needs beta = gamma_lag = 0")
    inn = config.innovations
    u = sample.y - config.alpha
    if config.quantile_shift is not None:
        if config.quantile_shift != tau:
            raise ConfigurationError("quantile_shift must equal tau")
        return u
    if inn.family not in ("gaussian", "student_t"):
        raise ConfigurationError("without quantile_shift only gaussian or student_t errors are supported")
    return u - math.sqrt(inn.sigma_uu) * standardized_quantile(inn, tau)


def _z_m(u, xl, w, m, tau, shift):
    ind = (u - shift <= 0.0).astype(float)
    psi = tau - ind
    return np.array([psi[:m].sum(), (psi[m:2 * m] * w[m:2 * m]).sum()]) / math.sqrt(m)


def linearization_residual(config: DgpConfig, tau: TauLike, v, m: int, seed) -> float:
    """Norm of ``Z_m(v) - Z_m(0) + D_m v`` for one simulated sample of size ``2m``.

    ``Z_m(v)`` evaluates the split-sample scores at the true parameters
    shifted by ``v' M_m^{-1} (1, x_{t-1})`` with ``M_m = diag(sqrt m, sqrt m)``.
    ``D_m`` uses a kernel estimate of the error density at zero.
    """
    t = as_tau(tau)
    v = np.asarray(v, dtype=float).ravel()
    if v.shape != (2,) or not np.all(np.isfinite(v)):
        raise ConfigurationError("v must be a finite 2-vector")
    if int(m) != m or m < 100:
        raise ConfigurationError("m must be an integer >= 100")
    m = int(m)
    cfg = config if config.n == 2 * m else DgpConfig.from_dict({**config.to_dict(), "n": 2 * m})
    sample = simulate_system(cfg, seed)
    u = _true_errors(cfg, sample, t)
    xl = sample.x_lag
    w = self_weight(xl)
    shift = (v[0] + v[1] * xl) / math.sqrt(m)
    z_v = _z_m(u, xl, w, m, t, shift)
    z_0 = _z_m(u, xl, w, m, t, 0.0)
    if not np.any(v):
        return float(np.linalg.norm(z_v - z_0))
    f = density_at_zero(u, tau=t)
    d_m = f * np.array([[1.0, xl[:m].mean()], [w[m:].mean(), (w[m:] * xl[m:]).mean()]])
    return float(np.linalg.norm(z_v - z_0 + d_m @ v))


def simulate_jc(c: float, steps: int, seed) -> OuPath:
    """Euler-Maruyama path of ``dJ = c J dt + dW`` on ``[0, 1]`` with ``J(0) = 0``."""
    if int(steps) != steps or steps < 100:
        raise ConfigurationError("steps must be an integer >= 100")
    steps = int(steps)
    dt = 1.0 / steps
    dw = np.random.default_rng(seed).standard_normal(steps) * math.sqrt(dt)
    vals = np.empty(steps + 1)
    vals[0] = 0.0
    from scipy import signal

    vals[1:] = signal.lfilter([1.0], [1.0, -(1.0 + c * dt)], dw)
    return OuPath(c=float(c), grid=np.linspace(0.0, 1.0, steps + 1), values=vals)


def ou_variance(c: float) -> float:
    """``Var J_c(1) = (e^{2c} - 1) / (2c)``, equal to 1 at ``c = 0``."""
    return 1.0 if c == 0 else math.expm1(2.0 * c) / (2.0 * c)


def scaled_path_functional(config: DgpConfig, seed) -> tuple[float, float]:
    """``(x_n / sqrt m, (1/m) sum_{t<=m} x_{t-1} / sqrt m)`` with ``m = n // 2``.

    For ``rho = 1 + c/n`` the endpoint behaves like ``sqrt(2 sigma_vv) J_c(1)``
    and the time average like ``sqrt(2 sigma_vv) int_0^1 J_c(r/2) dr``: the
    path is indexed on ``[0, 2m]`` while normalized by ``sqrt m``.
    """
    if config.persistence.gamma_exp != 1:
        raise ConfigurationError("scaled path functionals need a near-integrated design (gamma_exp = 1)")
    sample = simulate_system(config, seed)
    m = config.n // 2
    x = sample.x
    return float(x[config.n] / math.sqrt(m)), float(x[:m].sum() / m / math.sqrt(m))


def ks_distance(a, b=None) -> float:
    """Two-sample KS distance, or distance to N(0, 1) when ``b`` is omitted."""
    if b is None:
        return float(stats.kstest(np.asarray(a, dtype=float), "norm").statistic)
    return float(stats.ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float)).statistic)


def diagnostics_to_csv(rows, path=None) -> str:
    """Write a list of flat dicts as CSV; returns the text."""
    rows = list(rows)
    buf = io.StringIO()
    if rows:
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})
    text = buf.getvalue()
    if path is not None:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
