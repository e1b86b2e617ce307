"""Scalar and vector statistical primitives shared across the package."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy import special, stats

from .exceptions import ConfigurationError, DataError, DegenerateRegressorError

DENSITY_FLOOR = 1e-10


@dataclass(frozen=True)
class QuantileLevel:
    """A quantile level strictly inside (0, 1)."""

    tau: float

    def __post_init__(self):
        t = float(self.tau)
        if not math.isfinite(t) or not 0.0 < t < 1.0:
            raise ConfigurationError(f"quantile level must lie in (0, 1), got {self.tau!r}")
        object.__setattr__(self, "tau", t)

    def __float__(self):
        return self.tau


TauLike = Union[float, QuantileLevel]


def as_tau(tau: TauLike) -> float:
    """Validate and unwrap a quantile level."""
    if isinstance(tau, QuantileLevel):
        return tau.tau
    return QuantileLevel(tau).tau


@dataclass(frozen=True)
class DistributionRef:
    family: str = "chi_square"
    dof: int = 1

    def __post_init__(self):
        if self.family != "chi_square":
            raise ConfigurationError(f"unsupported reference family {self.family!r}")
        if int(self.dof) != self.dof or self.dof < 1:
            raise ConfigurationError(f"dof must be a positive integer, got {self.dof!r}")

    def sf(self, x: float) -> float:
        """Upper-tail probability, i.e. ``1 - cdf``."""
        if math.isinf(x):
            return 0.0
        return float(special.chdtrc(self.dof, max(x, 0.0)))


@dataclass
class TestResult:
    """Outcome of one hypothesis test.

    ``calibration`` is ``"asymptotic"`` when the p-value comes from the
    chi-square reference and ``"bootstrap"`` when it comes from a
    multiplier bootstrap. A statistic of ``inf`` together with
    ``converged=False`` marks a numerical failure (for example the null
    value lying outside the convex hull of the scores).
    """

    __test__ = False  # keep pytest from collecting this as a test class

    statistic: float
    reference: DistributionRef
    p_value: float
    method: str
    hypothesis: str
    calibration: str = "asymptotic"
    converged: bool = True
    estimates: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def dof(self) -> int:
        return self.reference.dof

    def reject(self, level: float = 0.05) -> bool:
        return bool(self.p_value < level)


def _check_finite(a, name):
    arr = np.asarray(a, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} must be finite")
    return arr


def psi_tau(u, tau: TauLike):
    """Quantile score ``tau - 1{u <= 0}``.

    Works elementwise on arrays; returns a float for scalar input.
    """
    t = as_tau(tau)
    arr = _check_finite(u, "u")
    out = t - (arr <= 0.0)
    return float(out) if out.ndim == 0 else out


def self_weight(x):
    """Bounded leverage weight ``x / sqrt(1 + x**2)``."""
    arr = _check_finite(x, "x")
    out = arr / np.sqrt(1.0 + arr * arr)
    return float(out) if out.ndim == 0 else out


def chi_square_cdf(x: float, dof: int) -> float:
    if dof < 1 or int(dof) != dof:
        raise ConfigurationError(f"dof must be a positive integer, got {dof!r}")
    if math.isnan(x) or x < 0:
        raise ConfigurationError(f"chi-square cdf needs x >= 0, got {x!r}")
    if math.isinf(x):
        return 1.0
    return float(special.chdtr(dof, x))


def chi_square_quantile(p: float, dof: int) -> float:
    if dof < 1 or int(dof) != dof:
        raise ConfigurationError(f"dof must be a positive integer, got {dof!r}")
    if not 0.0 < p < 1.0:
        raise ConfigurationError(f"probability must lie in (0, 1), got {p!r}")
    return float(stats.chi2.ppf(p, dof))


def hall_sheather_bandwidth(n: int, tau: float = 0.5, alpha: float = 0.05) -> float:
    """Hall-Sheather bandwidth in probability units."""
    z = stats.norm.ppf(tau)
    num = 1.5 * stats.norm.pdf(z) ** 2
    den = 2.0 * z**2 + 1.0
    return n ** (-1.0 / 3) * stats.norm.ppf(1 - alpha / 2) ** (2.0 / 3) * (num / den) ** (1.0 / 3)


def density_at_zero(residuals, bandwidth: Optional[float] = None, tau: TauLike = 0.5) -> float:
    """Gaussian-kernel density estimate of the residual law at zero.

    Parameters
    ----------
    residuals : array_like
        At least 10 finite values.
    bandwidth : float, optional
        Kernel bandwidth. When omitted the Hall-Sheather rule at ``tau`` is
        used, rescaled by the robust spread ``IQR / 1.349`` of the residuals.
    tau : float
        Quantile level used by the automatic bandwidth.

    Returns
    -------
    float
        The estimate, floored at ``1e-10`` so that it can safely be inverted.
    """
    r = _check_finite(residuals, "residuals").ravel()
    if r.size < 10:
        raise DataError(f"density estimate needs at least 10 residuals, got {r.size}")
    if bandwidth is None:
        q75, q25 = np.percentile(r, [75, 25])
        spread = (q75 - q25) / 1.349
        if spread <= 0:
            spread = np.std(r)
        if spread <= 0:
            spread = 1.0
        h = hall_sheather_bandwidth(r.size, as_tau(tau)) * spread
    else:
        h = float(bandwidth)
        if not h > 0:
            raise ConfigurationError(f"bandwidth must be positive, got {bandwidth!r}")
    est = np.mean(np.exp(-0.5 * (r / h) ** 2)) / (h * math.sqrt(2 * math.pi))
    return max(float(est), DENSITY_FLOOR)


def ar1_ols(x) -> tuple[float, float]:
    """Least-squares fit of ``x_t`` on ``(1, x_{t-1})``.

    Returns ``(rho_hat, intercept_hat)``.
    """
    arr = _check_finite(x, "x").ravel()
    if arr.size < 3:
        raise DataError("AR(1) fit needs at least 3 observations")
    lag, cur = arr[:-1], arr[1:]
    lag_c = lag - lag.mean()
    sxx = float(lag_c @ lag_c)
    if sxx <= 1e-14 * max(1.0, float(lag @ lag)):
        raise DegenerateRegressorError("degenerate regressor: lagged series has no variation")
    rho = float(lag_c @ (cur - cur.mean())) / sxx
    return rho, float(cur.mean() - rho * lag.mean())
