"""Random-weight (multiplier) bootstrap calibration.

Each replication multiplies per-observation score contributions by i.i.d.
weights with mean one and variance one; no residuals are resampled and no
conditional variance model is fitted, so the calibration is robust to
conditional heteroskedasticity. Scores are centred at their sample mean
under the null-restricted fit before weighting, which makes the weighted
score mean mimic the sampling noise of the observed one. For EL the
bootstrap panel is the centred score panel shifted by that weighted mean,
so the statistic's self-normalization sees the original score spread.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import el as _el
from .core_stats import DistributionRef, TauLike, TestResult, as_tau
from .exceptions import CalibrationError, ConfigurationError
from .ivx import IvxConfig, instrumented_scores

WEIGHT_FAMILIES = ("exponential_unit", "two_point_mammen", "unit")
MIN_CONVERGED = 50
LEVELS = (0.90, 0.95, 0.99)


@dataclass(frozen=True)
class BootstrapConfig:
    """``weight_family="unit"`` (all weights one) exists for testing only."""

    replications: int = 399
    weight_family: str = "exponential_unit"
    seed: int = 0

    def __post_init__(self):
        if int(self.replications) != self.replications or self.replications < 99:
            raise ConfigurationError("bootstrap needs at least 99 replications")
        if self.weight_family not in WEIGHT_FAMILIES:
            raise ConfigurationError(f"unknown weight family {self.weight_family!r}")


def draw_weights(n: int, config: BootstrapConfig, replication_index: int) -> np.ndarray:
    """Weights for one replication; a function of ``(seed, replication_index)`` only."""
    if config.weight_family == "unit":
        return np.ones(n)
    rng = np.random.default_rng([int(config.seed) & 0xFFFFFFFFFFFFFFFF, int(replication_index)])
    if config.weight_family == "exponential_unit":
        return rng.standard_exponential(n)
    return 2.0 * rng.integers(0, 2, size=n)


def weight_matrix(n: int, config: BootstrapConfig) -> np.ndarray:
    return np.stack([draw_weights(n, config, b) for b in range(config.replications)])


@dataclass
class BootstrapResult:
    statistic: float
    p_value: float
    critical_values: dict
    replications_used: int
    boot_stats: np.ndarray = field(repr=False)
    dof: int = 1
    method: str = "el"

    def as_test_result(self, hypothesis: str = "joint") -> TestResult:
        return TestResult(
            statistic=self.statistic,
            reference=DistributionRef(dof=self.dof),
            p_value=self.p_value,
            method=self.method,
            hypothesis=hypothesis,
            calibration="bootstrap",
            diagnostics={"replications_used": self.replications_used,
                         "critical_values": self.critical_values},
        )


def rank_pvalue(t0: float, boot) -> float:
    """``(1 + #{T_b >= T_0}) / (B + 1)`` over the finite bootstrap statistics."""
    tb = np.asarray(boot, dtype=float)
    tb = tb[np.isfinite(tb)]
    return float((1 + np.sum(tb >= t0)) / (tb.size + 1))


def _summarize(t0, boot, dof, method):
    finite = boot[np.isfinite(boot)]
    if finite.size < MIN_CONVERGED:
        raise CalibrationError(f"only {finite.size} bootstrap replications converged")
    crit = {lv: float(np.quantile(finite, lv)) for lv in LEVELS}
    return BootstrapResult(statistic=float(t0), p_value=rank_pvalue(t0, finite), critical_values=crit,
                           replications_used=int(finite.size), boot_stats=boot, dof=dof, method=method)


def _el_boot_stats(sample, tau, gamma0, Pi):
    """Multiplier-bootstrap EL statistics for ``beta = 0`` (and ``gamma = gamma0``)."""
    dynamic = gamma0 is not None
    e, w, wt, m = _el._ingredients(sample, 0.0, gamma0)
    cand, zbar, V, dvec = _el._intercept_candidates(e, w, wt, m, tau, dynamic)
    e1, e2, w2, wt2 = e[:m], e[m:], w[m:], wt[m:]
    a0 = _el._efficient_alpha(cand, zbar, V, dvec)
    centre = _el._panel_at(e1, e2, w2, wt2, a0, tau, dynamic).mean(axis=0)

    Pi = Pi[:, :m]
    B = Pi.shape[0]
    # mean weighted centred score at every candidate: (B, K, d)
    P1 = tau - (e1[None, :] <= cand[:, None])
    P2 = tau - (e2[None, :] <= cand[:, None])
    Zc = [P1, P2 * w2] + ([P2 * wt2] if dynamic else [])
    Zc = np.stack(Zc, axis=-1)
    pbar = Pi.mean(axis=1)
    zb = np.einsum("bi,kid->bkd", Pi, Zc) / m - pbar[:, None, None] * centre
    g = zb @ (np.linalg.pinv(V) @ dvec)
    # first sign change per replication
    neg = g < 0
    first = np.where(neg.any(axis=1), neg.argmax(axis=1), g.shape[1] - 1)
    prev = np.maximum(first - 1, 0)
    rows = np.arange(B)
    pick = np.where(np.abs(g[rows, first]) < np.abs(g[rows, prev]), first, prev)
    Zsel = Zc[pick]  # (B, m, d)
    # rows keep the spread of the observed scores and carry the bootstrap
    # mean; weighting the rows themselves would double their second moment
    Zb = Zsel - Zsel.mean(axis=1, keepdims=True) + zb[rows, pick][:, None, :]
    lam, conv, _, _ = _el._solve_lambda_batch(Zb)
    zero = ~Zb.any(axis=(1, 2))
    return _el._stat_from(Zb, lam, conv | zero)


def bootstrap_pvalue(sample, tau: TauLike, test_kind: str = "el", null_spec: dict | None = None,
                     config: BootstrapConfig = BootstrapConfig()) -> BootstrapResult:
    """Multiplier-bootstrap p-value and critical values for a no-predictability test.

    Parameters
    ----------
    test_kind : {"el", "ivx"}
    null_spec : dict, optional
        ``{"dynamic": bool}`` (default True), plus ``"ivx": IvxConfig`` for
        the IVX test. Only the joint null (all slopes zero) is bootstrapped.
    """
    t = as_tau(tau)
    spec = {"dynamic": True}
    spec.update(null_spec or {})
    dynamic = bool(spec["dynamic"])
    if spec.get("hypothesis", "joint") != "joint":
        raise ConfigurationError("the multiplier bootstrap is implemented for the joint null only")
    Pi = weight_matrix(sample.n, config)

    if test_kind == "el":
        gamma0 = 0.0 if dynamic else None
        res = _el.el_log_ratio(sample, t, 0.0, gamma0)
        boot = _el_boot_stats(sample, t, gamma0, Pi)
        return _summarize(res.statistic, boot, res.dof, "el")
    if test_kind == "ivx":
        sc = instrumented_scores(sample, t, spec.get("ivx", IvxConfig()), dynamic)
        t0 = max(sc.wald(), 0.0)
        sc_c = sc.s - sc.s.mean(axis=0)
        S = Pi @ sc_c  # (B, k)
        Minv = np.linalg.inv(sc.M)
        boot = np.einsum("bi,ij,bj->b", S, Minv, S) / (t * (1 - t))
        return _summarize(t0, boot, sc.cols.shape[1], "ivx")
    raise ConfigurationError(f"unknown test kind {test_kind!r}")
