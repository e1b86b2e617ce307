"""Simulation of the predictive-regression system.

The regressor follows a mean-centred autoregression

    x_t = mu * (1 - rho) + rho * x_{t-1} + v_t,   rho = 1 + c / n**gamma_exp

and the predictand

    y_t = alpha + beta * x_{t-1} + gamma_lag * y_{t-1} + u_t.

A negative ``c`` gives local-to-unity mean reversion, ``c = 0`` an exact
unit root, and ``gamma_exp = 0`` a fixed (stationary when ``-2 < c < 0``)
root.
"""

from __future__ import annotations

import csv
import functools
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy import signal, stats

from .core_stats import as_tau
from .exceptions import ConfigurationError, DataError, ExplosivePathError

BURN_IN = 100
EXPLOSION_BOUND = 1e12


@dataclass(frozen=True)
class PersistenceSpec:
    c: float = 0.0
    gamma_exp: float = 1.0
    mu: float = 0.0
    x0: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.gamma_exp <= 1.0:
            raise ConfigurationError(f"gamma_exp must lie in [0, 1], got {self.gamma_exp}")

    @classmethod
    def from_raw_intercept(cls, c, gamma_exp, raw_mu, n, x0=0.0):
        """Build from ``x_t = raw_mu + rho x_{t-1} + v_t`` (needs ``rho != 1``)."""
        rho = rho_from_persistence(cls(c, gamma_exp), n)
        if rho == 1.0:
            if raw_mu != 0.0:
                raise ConfigurationError("a nonzero raw intercept with a unit root is a drift, not supported")
            return cls(c, gamma_exp, 0.0, x0)
        return cls(c, gamma_exp, raw_mu / (1.0 - rho), x0)


def rho_from_persistence(spec: PersistenceSpec, n: int) -> float:
    """Autoregressive root ``1 + c / n**gamma_exp``."""
    if n < 1:
        raise ConfigurationError("n must be at least 1")
    rho = 1.0 + spec.c / float(n) ** spec.gamma_exp
    if abs(rho) > 2.0:
        raise ConfigurationError(f"|rho| = {abs(rho):.3g} > 2: persistence misconfigured")
    return rho


@dataclass(frozen=True)
class InnovationSpec:
    """Innovation law for ``(u_t, v_t)``.

    ``family`` is one of ``"gaussian"``, ``"student_t"``, ``"cc_arch"`` or
    ``"none"`` (all innovations zero, for noiseless checks).
    For ``cc_arch`` the regressor shock ``v`` and the orthogonal part of
    ``u`` are independent ARCH(1) processes with ``(omega, a1)`` given by
    ``arch_x`` and ``arch_yx``; ``u = vartheta * v + e_yx``. ``sigma_*``
    and ``rho_uv`` are ignored in that case.
    """

    family: str = "gaussian"
    sigma_uu: float = 1.0
    sigma_vv: float = 1.0
    rho_uv: float = 0.0
    dof: float = 5.0
    vartheta: float = 0.0
    arch_x: tuple = (0.5, 0.5)
    arch_yx: tuple = (0.5, 0.5)

    def __post_init__(self):
        if self.family not in ("gaussian", "student_t", "cc_arch", "none"):
            raise ConfigurationError(f"unknown innovation family {self.family!r}")
        if self.family == "cc_arch":
            for omega, a1 in (self.arch_x, self.arch_yx):
                if not omega > 0 or not 0 <= a1 < 1:
                    raise ConfigurationError("ARCH(1) needs omega > 0 and 0 <= a1 < 1")
            return
        if not (self.sigma_uu > 0 and self.sigma_vv > 0):
            raise ConfigurationError("innovation variances must be positive")
        if not -1.0 <= self.rho_uv <= 1.0:
            raise ConfigurationError("rho_uv must lie in [-1, 1]")
        if abs(self.rho_uv) >= 1.0:
            raise ConfigurationError("innovation covariance is not positive definite")
        if self.family == "student_t" and not self.dof > 2:
            raise ConfigurationError("student_t innovations need dof > 2")

    @property
    def covariance(self) -> np.ndarray:
        cov = self.rho_uv * np.sqrt(self.sigma_uu * self.sigma_vv)
        return np.array([[self.sigma_uu, cov], [cov, self.sigma_vv]])


@dataclass(frozen=True)
class DgpConfig:
    n: int = 500
    alpha: float = 0.0
    beta: float = 0.0
    gamma_lag: float = 0.0
    persistence: PersistenceSpec = field(default_factory=PersistenceSpec)
    innovations: InnovationSpec = field(default_factory=InnovationSpec)
    # When set, u_t is recentred so its conditional quantile at this level is 0.
    quantile_shift: Optional[float] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 20:
            raise ConfigurationError(f"n must be an integer >= 20, got {self.n}")
        if self.gamma_lag != 0.0 and not abs(self.gamma_lag) < 1.0:
            raise ConfigurationError("|gamma_lag| must be < 1 for a stationary predictand")
        if self.quantile_shift is not None:
            as_tau(self.quantile_shift)

    @property
    def rho(self) -> float:
        return rho_from_persistence(self.persistence, self.n)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DgpConfig":
        d = dict(d)
        pers = PersistenceSpec(**d.pop("persistence", {}))
        inn = dict(d.pop("innovations", {}))
        for key in ("arch_x", "arch_yx"):
            if key in inn:
                inn[key] = tuple(inn[key])
        return cls(persistence=pers, innovations=InnovationSpec(**inn), **d)

    def digest(self) -> str:
        return _config_digest(self)


@functools.lru_cache(maxsize=4096)
def _config_digest(config: DgpConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class TimeSeriesSample:
    """Observed data ``y_1..y_n`` with regressor ``x_0..x_n``.

    ``y0`` is the pre-sample value of the predictand, needed whenever the
    lagged predictand enters the model.
    """

    y: np.ndarray
    x: np.ndarray
    y0: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.x = np.asarray(self.x, dtype=float).ravel()
        self.y0 = float(self.y0)
        if self.x.size != self.y.size + 1:
            raise DataError(f"x must have length n + 1 = {self.y.size + 1}, got {self.x.size}")
        if not (np.all(np.isfinite(self.y)) and np.all(np.isfinite(self.x)) and np.isfinite(self.y0)):
            raise DataError("sample contains non-finite values")

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def x_lag(self) -> np.ndarray:
        return self.x[:-1]

    @property
    def y_lag(self) -> np.ndarray:
        return np.concatenate(([self.y0], self.y[:-1]))

    def design(self, dynamic: bool = False) -> np.ndarray:
        cols = [np.ones(self.n), self.x_lag]
        if dynamic:
            cols.append(self.y_lag)
        return np.column_stack(cols)

    def to_csv(self, path=None) -> str:
        """Write columns ``t, y, x``; row ``t = 0`` carries ``y0`` and ``x_0``."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "y", "x"])
        w.writerow([0, repr(self.y0), repr(float(self.x[0]))])
        for t in range(1, self.n + 1):
            w.writerow([t, repr(float(self.y[t - 1])), repr(float(self.x[t]))])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path_or_text) -> "TimeSeriesSample":
        if "\n" in str(path_or_text):
            rows = list(csv.reader(io.StringIO(path_or_text)))
        else:
            with open(path_or_text, newline="") as fh:
                rows = list(csv.reader(fh))
        header = [h.strip() for h in rows[0]]
        try:
            iy, ix = header.index("y"), header.index("x")
        except ValueError:
            raise DataError("sample CSV needs columns t, y, x") from None
        body = [r for r in rows[1:] if r]
        ys = np.array([float(r[iy]) for r in body])
        xs = np.array([float(r[ix]) for r in body])
        return cls(y=ys[1:], x=xs, y0=ys[0])


@dataclass
class Innovations:
    u: np.ndarray
    v: np.ndarray
    # conditional standard deviation of u_t (constant for i.i.d. families)
    sigma_u: np.ndarray


def cc_arch_covariance(vartheta: float, sigma2_x: float, sigma2_yx: float) -> np.ndarray:
    """Conditional covariance of ``(eps_x, eps_y)`` under constant-correlation ARCH."""
    if not (sigma2_x > 0 and sigma2_yx > 0):
        raise ConfigurationError("conditional variances must be positive")
    d = np.array([[1.0, 0.0], [vartheta, 1.0]])
    return d @ np.diag([sigma2_x, sigma2_yx]) @ d.T


def _arch1(eta, omega, a1):
    n = eta.size
    eps = np.empty(n)
    sig2 = np.empty(n)
    prev = omega / (1.0 - a1)  # start at the unconditional variance
    s2 = prev
    for t in range(n):
        sig2[t] = s2
        eps[t] = np.sqrt(s2) * eta[t]
        s2 = omega + a1 * eps[t] * eps[t]
    return eps, sig2


def simulate_innovations(spec: InnovationSpec, n: int, seed) -> Innovations:
    """Draw ``n`` innovation pairs; identical ``(spec, n, seed)`` give identical output."""
    if n < 1:
        raise ConfigurationError("n must be at least 1")
    rng = np.random.default_rng(seed)
    if spec.family == "none":
        z = np.zeros(n)
        return Innovations(u=z, v=z.copy(), sigma_u=np.zeros(n))
    if spec.family == "cc_arch":
        eta = rng.standard_normal((n + BURN_IN, 2))
        ex, s2x = _arch1(eta[:, 0], *spec.arch_x)
        eyx, s2yx = _arch1(eta[:, 1], *spec.arch_yx)
        sl = slice(BURN_IN, None)
        u = spec.vartheta * ex[sl] + eyx[sl]
        sig_u = np.sqrt(spec.vartheta**2 * s2x[sl] + s2yx[sl])
        return Innovations(u=u, v=ex[sl].copy(), sigma_u=sig_u)

    if spec.family == "gaussian":
        e = rng.standard_normal((n, 2))
    else:
        e = rng.standard_t(spec.dof, size=(n, 2)) * np.sqrt((spec.dof - 2.0) / spec.dof)
    chol = np.linalg.cholesky(spec.covariance)
    w = e @ chol.T
    return Innovations(u=w[:, 0], v=w[:, 1], sigma_u=np.full(n, np.sqrt(spec.sigma_uu)))


def standardized_quantile(spec: InnovationSpec, tau: float) -> float:
    """Quantile of the standardized innovation law driving ``u``."""
    if spec.family == "student_t":
        return float(stats.t.ppf(tau, spec.dof) * np.sqrt((spec.dof - 2.0) / spec.dof))
    # gaussian, and cc_arch whose u is conditionally gaussian
    return float(stats.norm.ppf(tau))


def _ar1_filter(shocks, coef, start):
    # out_t = coef * out_{t-1} + shocks_t with out_0 = start
    out, _ = signal.lfilter([1.0], [1.0, -coef], shocks, zi=[coef * start])
    return out


def simulate_system(config: DgpConfig, seed) -> TimeSeriesSample:
    n = config.n
    rho = config.rho
    pers = config.persistence
    stationary_x = pers.gamma_exp == 0.0 and abs(rho) < 1.0

    inn = simulate_innovations(config.innovations, n + BURN_IN, seed)
    u = inn.u
    if config.quantile_shift is not None:
        q = standardized_quantile(config.innovations, config.quantile_shift)
        u = u - inn.sigma_u * q
    v = inn.v

    drift = pers.mu * (1.0 - rho)
    x_prev = pers.x0
    if stationary_x:
        for t in range(BURN_IN):
            x_prev = drift + rho * x_prev + v[t]
    x = np.empty(n + 1)
    x[0] = x_prev
    x[1:] = _ar1_filter(drift + v[BURN_IN:], rho, x_prev)
    if not np.all(np.abs(x) <= EXPLOSION_BOUND):
        raise ExplosivePathError("regressor path exceeded 1e12 in absolute value")

    a, b, g = config.alpha, config.beta, config.gamma_lag
    y_prev = a / (1.0 - g)
    for t in range(BURN_IN):
        y_prev = a + b * x[0] + g * y_prev + u[t]
    uu = u[BURN_IN:]
    if g == 0.0:
        y = a + b * x[:-1] + uu
    else:
        y = _ar1_filter(a + b * x[:-1] + uu, g, y_prev)
    if not np.all(np.abs(y) <= EXPLOSION_BOUND):
        raise ExplosivePathError("predictand path exceeded 1e12 in absolute value")
    meta = {"seed": seed if isinstance(seed, (int, np.integer)) else repr(seed), "config": config.digest()}
    return TimeSeriesSample(y=y, x=x, y0=y_prev, meta=meta)
