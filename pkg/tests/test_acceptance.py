"""Acceptance criteria 1-10 at full scale.

Each test records a ``CRITERION k: PASS|FAIL ...`` line, printed as it
finishes and again in the terminal summary. Expect roughly half an hour
on a single core; criteria 1-3 dominate.
"""

import json
import math
import os

import numpy as np
import pytest
from scipy import optimize

from qpredict import asymptotics as A
from qpredict.cli import main
from qpredict.dgp import DgpConfig, PersistenceSpec, simulate_system
from qpredict.el import el_statistic
from qpredict.montecarlo import McGrid, run_grid
from qpredict.qr import brute_force_qr_oracle, fit_quantile_regression

pytestmark = pytest.mark.slow

MASTER_SEED = 20240611
JOBS = os.cpu_count() or 1
SIZE_GRID = dict(n=[500], c=[0.0, -5.0, -20.0], rho_uv=[0.0, -0.95], alpha=[0.1], mu=[0.0, 0.5],
                 tau=[0.25, 0.5, 0.75], replications=2000, master_seed=MASTER_SEED, levels=[0.05])
BETAS = [0.0, 0.05, 0.1, 0.2, 0.5]
STATIONARY = DgpConfig(n=2000, alpha=0.1, persistence=PersistenceSpec(c=-0.5, gamma_exp=0.0))


@pytest.fixture
def report(request, capsys):
    def emit(k, ok, detail):
        line = f"CRITERION {k}: {'PASS' if ok else 'FAIL'} {detail}"
        request.config._criteria_lines.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok
    return emit


def _key(coords, drop=()):
    return tuple((k, v) for k, v in coords.items() if k not in drop)


@pytest.fixture(scope="module")
def size_results():
    rows = run_grid(McGrid(**SIZE_GRID, methods=["el", "ivx"]), jobs=JOBS)
    return {m: [r for r in rows if r.coordinates["method"] == m] for m in ("el", "ivx")}


def _rate_summary(rows):
    rates = [r.rejection_rate(0.05) for r in rows]
    return min(rates), max(rates)


def test_criterion_1_el_size(size_results, report):
    rows = size_results["el"]
    lo, hi = _rate_summary(rows)
    bad = [(_key(r.coordinates, ("n", "alpha", "gamma_lag", "innovations", "beta", "method", "calibration")),
            round(r.rejection_rate(0.05), 4)) for r in rows if not 0.03 <= r.rejection_rate(0.05) <= 0.08]
    fails = sum(r.convergence_failures for r in rows)
    ok = report(1, not bad, f"EL size over {len(rows)} cells in [{lo:.4f}, {hi:.4f}], target [0.03, 0.08]; "
                            f"hull failures {fails}; outside: {bad}")
    assert ok


def test_criterion_2_ivx_size(size_results, report):
    rows = size_results["ivx"]
    lo, hi = _rate_summary(rows)
    bad = [(_key(r.coordinates, ("n", "alpha", "gamma_lag", "innovations", "beta", "method", "calibration")),
            round(r.rejection_rate(0.05), 4)) for r in rows if not 0.03 <= r.rejection_rate(0.05) <= 0.09]

    def worst(method):
        return max(abs(r.rejection_rate(0.05) - 0.05) for r in size_results[method] if r.coordinates["mu"] == 0.5)

    d_el, d_ivx = worst("el"), worst("ivx")
    ok = report(2, not bad and d_el <= d_ivx + 0.01,
                f"IVX size in [{lo:.4f}, {hi:.4f}], target [0.03, 0.09]; worst distortion at mu=0.5 "
                f"EL {d_el:.4f} vs IVX {d_ivx:.4f}; outside: {bad}")
    assert ok


def test_criterion_3_power_monotone(size_results, report):
    alt = run_grid(McGrid(**{**SIZE_GRID, "beta": BETAS[1:]}, methods=["el"]), jobs=JOBS)
    curves = {}
    for r in size_results["el"] + alt:
        curves.setdefault(_key(r.coordinates, ("beta",)), {})[r.coordinates["beta"]] = r
    breaks, unreliable = [], 0
    for key, by_beta in curves.items():
        rates = [by_beta[b].rejection_rate(0.05) for b in BETAS]
        unreliable += sum(by_beta[b].unreliable for b in BETAS)
        if any(b < a for a, b in zip(rates, rates[1:])):
            breaks.append((dict(key)["c"], dict(key)["rho_uv"], dict(key)["mu"], dict(key)["tau"],
                           [round(x, 4) for x in rates]))
    target = [curves[k][0.5].rejection_rate(0.05) for k in curves
              if dict(k)["c"] == -5.0 and dict(k)["tau"] == 0.5]
    ok = report(3, not breaks and min(target) >= 0.9,
                f"EL power nondecreasing in beta in {len(curves) - len(breaks)}/{len(curves)} cells; "
                f"min power at beta=0.5, c=-5, tau=0.5: {min(target):.4f}; unreliable cells {unreliable}; "
                f"breaks (c, rho_uv, mu, tau, rates): {breaks}")
    assert ok


def test_criterion_4_oracle_equivalence(report):
    rng = np.random.default_rng(MASTER_SEED)
    worst = 0.0
    for _ in range(500):
        p = int(rng.integers(1, 4))
        n = int(rng.integers(p + 1, 13))
        X = rng.standard_normal((n, p))
        X[:, 0] = 1.0
        y = rng.standard_normal(n)
        tau = float(rng.uniform(0.05, 0.95))
        w = rng.uniform(0.1, 2.0, n) if rng.random() < 0.5 else None
        gap = abs(fit_quantile_regression(X, y, tau, weights=w).objective
                  - brute_force_qr_oracle(X, y, tau, weights=w).objective)
        worst = max(worst, gap)
    ok = report(4, worst <= 1e-10, f"max |objective - oracle| over 500 instances = {worst:.3e}")
    assert ok


def _interior_margin(z):
    """Largest t with p_i >= t, sum p = 1, sum p_i z_i = 0; positive iff 0 is interior to the hull."""
    n, d = z.shape
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A_eq = np.zeros((d + 1, n + 1))
    A_eq[:d, :n] = z.T
    A_eq[d, :n] = 1.0
    b_eq = np.zeros(d + 1)
    b_eq[d] = 1.0
    A_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
    res = optimize.linprog(c, A_ub=A_ub, b_ub=np.zeros(n), A_eq=A_eq, b_eq=b_eq,
                           bounds=[(0, None)] * n + [(None, None)], method="highs")
    return res.x[-1] if res.status == 0 else -1.0


def test_criterion_5_el_internals(report):
    rng = np.random.default_rng(MASTER_SEED + 5)
    checked = worst_sum = worst_foc = 0.0
    min_stat, nonzero_centred, not_conv = math.inf, 0, 0
    while checked < 1000:
        n, d = int(rng.integers(15, 150)), int(rng.integers(1, 4))
        z = rng.standard_normal((n, d)) * rng.uniform(0.2, 3.0, d) + rng.uniform(-0.4, 0.4, d)
        if _interior_margin(z) <= 1e-9:
            continue
        checked += 1
        stat, sol = el_statistic(z)
        if not sol.converged:
            not_conv += 1
            continue
        arg = 1.0 + z @ sol.lam
        p = 1.0 / (n * arg)
        worst_sum = max(worst_sum, abs(p.sum() - 1.0))
        worst_foc = max(worst_foc, np.abs((z / arg[:, None]).sum(axis=0)).max())
        min_stat = min(min_stat, stat)
        zc = z - z.mean(axis=0)
        nonzero_centred += el_statistic(zc)[0] != 0.0
    ok = (not_conv == 0 and worst_sum <= 1e-8 and worst_foc < 1e-8 and min_stat >= 0 and nonzero_centred == 0)
    report(5, ok, f"1000 interior panels: non-converged {not_conv}, max |sum p - 1| {worst_sum:.2e}, "
                  f"max FOC {worst_foc:.2e}, min stat {min_stat:.3e}, centred panels with stat != 0: {nonzero_centred}")
    assert ok


def test_criterion_6_stationary_normal_limit(report):
    z = [A.standardized_slope(simulate_system(STATIONARY, [MASTER_SEED, r]), 0.5, 0.0) for r in range(1000)]
    ks = A.ks_distance(z)
    ok = report(6, ks < 0.06, f"KS to N(0,1) = {ks:.4f} (target < 0.06); mean {np.mean(z):.3f}, var {np.var(z):.3f}")
    assert ok


def test_criterion_7_linearization_decay(report):
    small = [A.linearization_residual(STATIONARY, 0.5, [1.0, 1.0], 200, [MASTER_SEED, r]) for r in range(200)]
    large = [A.linearization_residual(STATIONARY, 0.5, [1.0, 1.0], 2000, [MASTER_SEED, r]) for r in range(200)]
    ok = report(7, np.mean(large) < np.mean(small),
                f"mean residual m=200: {np.mean(small):.4f}, m=2000: {np.mean(large):.4f}")
    assert ok


def test_criterion_8_ou_variance(report):
    parts, ok = [], True
    for c in (-10.0, -2.0, 0.0):
        ends = np.array([A.simulate_jc(c, 1000, [MASTER_SEED, int(-c), r]).values[-1] for r in range(5000)])
        rel = ends.var() / A.ou_variance(c) - 1.0
        ok &= abs(rel) <= 0.10
        parts.append(f"c={c:g}: {ends.var():.4f} vs {A.ou_variance(c):.4f} ({rel:+.1%})")
    report(8, ok, "; ".join(parts))
    assert ok


def test_criterion_9_bootstrap_under_arch(report):
    grid = McGrid(n=[500], c=[-5.0], alpha=[0.1], innovations=["cc_arch"],
                  innovation_params={"vartheta": 1.0, "arch_x": (0.5, 0.5), "arch_yx": (0.5, 0.5)},
                  tau=[0.5], methods=["el"], calibration=["asymptotic", "bootstrap"], replications=1000,
                  bootstrap_replications=399, master_seed=MASTER_SEED)
    rows = {r.coordinates["calibration"]: r for r in run_grid(grid, jobs=JOBS)}
    boot, asym = rows["bootstrap"].rejection_rate(0.05), rows["asymptotic"].rejection_rate(0.05)
    ok = report(9, 0.03 <= boot <= 0.08,
                f"cc_arch, c=-5, tau=0.5: bootstrap rejection {boot:.4f} (target [0.03, 0.08]), "
                f"asymptotic {asym:.4f}; failures {rows['bootstrap'].convergence_failures}/"
                f"{rows['asymptotic'].convergence_failures}")
    assert ok


def test_criterion_10_determinism(tmp_path, report):
    cfg = tmp_path / "grid.json"
    cfg.write_text(json.dumps({"n": [200], "c": [0.0, -5.0], "beta": [0.0, 0.1], "tau": [0.25, 0.75],
                               "methods": ["el", "ivx"], "replications": 500, "levels": [0.01, 0.05, 0.1]}))
    outs = []
    for jobs in (1, 8):
        path = tmp_path / f"jobs{jobs}.csv"
        assert main(["mc", str(cfg), "--seed", str(MASTER_SEED), "--jobs", str(jobs), "--out", str(path)]) == 0
        outs.append(path.read_bytes())
    ok = report(10, outs[0] == outs[1], f"--jobs 1 vs --jobs 8: {len(outs[0])} bytes, identical={outs[0] == outs[1]}")
    assert ok
