"""IVX instrumentation and the instrumented quantile score (Wald-type) test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .core_stats import DistributionRef, TauLike, TestResult, as_tau, density_at_zero
from .exceptions import ConfigurationError, DataError, DegenerateRegressorError, NumericalError


CORRECTIONS = ("fm", "none")


@dataclass(frozen=True)
class IvxConfig:
    """Instrument persistence ``rho_z = 1 - c_z / n^delta`` and the normalizer variant.

    ``correction="fm"`` shrinks the ``z`` block of ``M`` by
    ``n zbar^2 (1 - kappa^2 / (tau (1 - tau) sigma_vv))``, where ``kappa``
    is the sample covariance of the regressor shocks with the quantile
    scores. ``"none"`` keeps the plain cross-product ``sum z z'``.
    """

    c_z: float = 1.0
    delta: float = 0.95
    correction: str = "fm"

    def __post_init__(self):
        if self.correction not in CORRECTIONS:
            raise ConfigurationError(f"unknown IVX correction {self.correction!r}")
        if not self.c_z > 0:
            raise ConfigurationError("c_z must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ConfigurationError("delta must lie in (0, 1)")

    def rho_z(self, n: int) -> float:
        return 1.0 - self.c_z / float(n) ** self.delta


def build_instrument(x, config: IvxConfig = IvxConfig()) -> np.ndarray:
    """Mildly integrated instrument ``z_t = rho_z z_{t-1} + (x_t - x_{t-1})``, ``z_0 = 0``.

    ``x`` holds ``x_0..x_n``; the result holds ``z_1..z_n``.
    """
    x = np.asarray(x, dtype=float).ravel()
    n = x.size - 1
    if n < 2:
        raise DataError("instrument construction needs at least 3 regressor values")
    rz = config.rho_z(n)
    return signal.lfilter([1.0], [1.0, -rz], np.diff(x))


@dataclass
class InstrumentedScores:
    """Per-observation instrumented scores under the null and their normalizer."""

    s: np.ndarray  # (n, k) rows cols_t * psi(r_t)
    cols: np.ndarray  # (n, k) z_{t-1} and, when dynamic, demeaned y_{t-1}
    M: np.ndarray
    tau: float
    alpha: float

    def wald(self, s_sum=None) -> float:
        S = self.s.sum(axis=0) if s_sum is None else s_sum
        return float(S @ np.linalg.solve(self.M, S)) / (self.tau * (1.0 - self.tau))


def _fm_share(x, psi, tau):
    """``1 - kappa^2 / (tau (1 - tau) sigma_vv)`` from AR(1) residuals of ``x``, clipped to [0, 1].

    Because the null intercept makes ``sum psi = 0``, the score sum is really
    ``sum (z - zbar) psi``. Its variance sits between ``sum (z - zbar)^2``
    (exogenous regressor) and ``sum z^2`` (perfectly correlated shocks).
    """
    X = np.column_stack([np.ones(x.size - 1), x[:-1]])
    v = x[1:] - X @ np.linalg.lstsq(X, x[1:], rcond=None)[0]
    svv = float(v @ v) / v.size
    if svv <= 0.0:
        return 1.0
    kappa = float(v @ psi) / v.size
    return min(max(1.0 - kappa * kappa / (tau * (1.0 - tau) * svv), 0.0), 1.0)


def instrumented_scores(sample, tau: TauLike, config: IvxConfig = IvxConfig(), dynamic: bool = False) -> InstrumentedScores:
    t = as_tau(tau)
    n = sample.n
    z = build_instrument(sample.x, config)
    if not np.any(z):
        raise DegenerateRegressorError("degenerate instrument: regressor is constant")
    z_lag = np.concatenate(([0.0], z[:-1]))
    # z enters undemeaned: centring it drags future regressor shocks into
    # every score term and over-rejects under unit-root endogeneity
    cols = [z_lag]
    if dynamic:
        yl = sample.y_lag
        cols.append(yl - yl.mean())
    C = np.column_stack(cols)
    # null-restricted fit: intercept only, i.e. the tau-quantile of y (order statistic)
    ys = np.sort(sample.y)
    alpha = float(ys[max(int(math.ceil(t * n)) - 1, 0)])
    psi = t - (sample.y - alpha <= 0.0)
    M = C.T @ C
    if config.correction == "fm":
        M[0, 0] -= n * z_lag.mean() ** 2 * _fm_share(sample.x, psi, t)
    if np.linalg.cond(M) > 1e14:
        raise NumericalError("instrument normalizer is singular")
    return InstrumentedScores(s=C * psi[:, None], cols=C, M=M, tau=t, alpha=alpha)


def ivx_qr_test(sample, tau: TauLike, config: IvxConfig = IvxConfig(), dynamic: bool = False,
                estimate: bool = False) -> TestResult:
    """IVX quantile test of ``beta = 0`` (and ``gamma = 0`` when ``dynamic``).

    The statistic is ``S' M^{-1} S / (tau (1 - tau))`` with ``S`` the sum of
    ``z_{t-1}`` (and demeaned ``y_{t-1}``) times the quantile score of the
    null-restricted residuals and ``M`` the columns' cross-product, with the
    finite-sample correction of :class:`IvxConfig` applied to the ``z`` block. With
    ``estimate=True`` the unrestricted self-weighted fit and its sparsity
    estimate are attached to the result (this costs an LP solve).
    """
    sc = instrumented_scores(sample, tau, config, dynamic)
    W = max(sc.wald(), 0.0)
    dof = sc.cols.shape[1]
    ref = DistributionRef(dof=dof)
    estimates = {"alpha_null": sc.alpha}
    if estimate:
        from .qr import self_weighted_qr

        fit = self_weighted_qr(sample, sc.tau, dynamic=dynamic)
        estimates["coefficients"] = fit.coefficients.tolist()
        estimates["density_at_zero"] = density_at_zero(fit.residuals, tau=sc.tau)
    return TestResult(
        statistic=W,
        reference=ref,
        p_value=ref.sf(W),
        method="ivx",
        hypothesis="joint" if dynamic else "beta_only",
        estimates=estimates,
        diagnostics={"rho_z": config.rho_z(sample.n)},
    )
