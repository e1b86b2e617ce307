"""Monte Carlo size and power experiments over configuration grids.

Every replication seed is a 64-bit BLAKE2b hash of the master seed, the
data-generating coordinates other than ``beta``, and the replication index.
Samples that differ only in ``beta`` therefore share their innovations
(common random numbers), and results never depend on how work is split
across processes.
"""

from __future__ import annotations

import hashlib
import io
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .bootstrap import BootstrapConfig, bootstrap_pvalue
from .dgp import DgpConfig, InnovationSpec, PersistenceSpec, simulate_system
from .el import el_test
from .exceptions import ConfigurationError, NumericalError, QpredictError
from .ivx import ivx_qr_test

METHODS = ("el", "ivx")
CALIBRATIONS = ("asymptotic", "bootstrap")
UNRELIABLE_SHARE = 0.2
CHUNK = 250  # replications per work unit

DGP_AXES = ("n", "c", "rho_uv", "alpha", "mu", "gamma_lag", "innovations", "beta")
TEST_AXES = ("tau", "method", "calibration")


@dataclass
class McGrid:
    n: list = field(default_factory=lambda: [500])
    c: list = field(default_factory=lambda: [0.0])
    rho_uv: list = field(default_factory=lambda: [0.0])
    alpha: list = field(default_factory=lambda: [0.0])
    mu: list = field(default_factory=lambda: [0.0])
    beta: list = field(default_factory=lambda: [0.0])
    gamma_lag: list = field(default_factory=lambda: [0.0])
    innovations: list = field(default_factory=lambda: ["gaussian"])
    tau: list = field(default_factory=lambda: [0.5])
    methods: list = field(default_factory=lambda: ["el"])
    calibration: list = field(default_factory=lambda: ["asymptotic"])
    replications: int = 1000
    master_seed: int = 0
    levels: list = field(default_factory=lambda: [0.05])
    gamma_exp: float = 1.0
    dynamic: bool = True
    bootstrap_replications: int = 399
    innovation_params: dict = field(default_factory=dict)

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, list) and not v:
                raise ConfigurationError(f"grid axis {f.name!r} is empty")
        if int(self.replications) != self.replications or self.replications < 200:
            raise ConfigurationError("replications must be an integer >= 200")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigurationError(f"unknown method {m!r}")
        for cal in self.calibration:
            if cal not in CALIBRATIONS:
                raise ConfigurationError(f"unknown calibration {cal!r}")
        for lv in self.levels:
            if not 0.0 < lv < 1.0:
                raise ConfigurationError(f"nominal level must lie in (0, 1), got {lv!r}")
        for t in self.tau:
            if not 0.0 < t < 1.0:
                raise ConfigurationError(f"quantile level must lie in (0, 1), got {t!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "McGrid":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown grid keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path_or_text: str) -> "McGrid":
        text = path_or_text
        if not text.lstrip().startswith("{"):
            with open(path_or_text) as fh:
                text = fh.read()
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"grid is not valid JSON: {exc}") from None

    def dgp_cells(self):
        for vals in itertools.product(*(getattr(self, a) for a in DGP_AXES)):
            yield dict(zip(DGP_AXES, vals))

    def test_cells(self):
        for tau, method, cal in itertools.product(self.tau, self.methods, self.calibration):
            yield {"tau": tau, "method": method, "calibration": cal}

    def dgp_config(self, coords: dict) -> DgpConfig:
        inn = InnovationSpec(family=coords["innovations"], rho_uv=coords["rho_uv"], **self.innovation_params)
        return DgpConfig(n=int(coords["n"]), alpha=coords["alpha"], beta=coords["beta"],
                         gamma_lag=coords["gamma_lag"],
                         persistence=PersistenceSpec(c=coords["c"], gamma_exp=self.gamma_exp, mu=coords["mu"]),
                         innovations=inn)


@dataclass
class McCellResult:
    coordinates: dict
    replications: int
    rejections: dict  # level -> count among non-failed replications
    convergence_failures: int
    wall_time: float = 0.0

    @property
    def used(self) -> int:
        return self.replications - self.convergence_failures

    def rejection_rate(self, level: float) -> float:
        return self.rejections[level] / self.used if self.used else float("nan")

    def sensitivity_rate(self, level: float) -> float:
        """Failures counted as non-rejections."""
        return self.rejections[level] / self.replications

    def mc_std_error(self, level: float) -> float:
        return mc_std_error(self.rejection_rate(level), self.used)

    @property
    def unreliable(self) -> bool:
        return self.convergence_failures > UNRELIABLE_SHARE * self.replications


def mc_std_error(p: float, r: int) -> float:
    """``sqrt(p (1 - p) / R)``."""
    return math.sqrt(p * (1.0 - p) / r) if r > 0 else float("nan")


def derive_seed(master_seed: int, coords: dict, r: int) -> int:
    """64-bit replication seed from the master seed, DGP coordinates (excluding beta) and ``r``."""
    key = {k: coords[k] for k in DGP_AXES if k != "beta"}
    payload = json.dumps([int(master_seed), sorted((k, repr(v)) for k, v in key.items()), int(r)])
    return int.from_bytes(hashlib.blake2b(payload.encode(), digest_size=8).digest(), "little")


def _one_test(sample, tcell, grid: McGrid, seed):
    tau, method, cal = tcell["tau"], tcell["method"], tcell["calibration"]
    if cal == "bootstrap":
        cfg = BootstrapConfig(replications=grid.bootstrap_replications, seed=seed)
        return bootstrap_pvalue(sample, tau, method, {"dynamic": grid.dynamic}, cfg).p_value
    if method == "el":
        res = el_test(sample, tau, "joint", dynamic=grid.dynamic)
    else:
        res = ivx_qr_test(sample, tau, dynamic=grid.dynamic)
    if not res.converged:
        return None
    return res.p_value


def _run_chunk(grid: McGrid, coords: dict, start: int, stop: int):
    """Tally rejections for replications ``start..stop-1`` of one DGP cell."""
    cfg = grid.dgp_config(coords)
    tcells = list(grid.test_cells())
    rej = np.zeros((len(tcells), len(grid.levels)), dtype=np.int64)
    fail = np.zeros(len(tcells), dtype=np.int64)
    levels = np.asarray(grid.levels)
    t0 = time.perf_counter()
    for r in range(start, stop):
        seed = derive_seed(grid.master_seed, coords, r)
        try:
            sample = simulate_system(cfg, seed)
        except NumericalError:
            fail += 1
            continue
        for k, tc in enumerate(tcells):
            try:
                p = _one_test(sample, tc, grid, seed)
            except QpredictError:
                p = None
            if p is None:
                fail[k] += 1
            else:
                rej[k] += p < levels
    return rej, fail, time.perf_counter() - t0


def _run_dgp_cells(grid: McGrid, dgp_cells, jobs: int):
    units = [(i, s, min(s + CHUNK, grid.replications))
             for i in range(len(dgp_cells)) for s in range(0, grid.replications, CHUNK)]
    if jobs <= 1:
        outs = [_run_chunk(grid, dgp_cells[i], s, e) for i, s, e in units]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            futs = [ex.submit(_run_chunk, grid, dgp_cells[i], s, e) for i, s, e in units]
            outs = [f.result() for f in futs]
    agg = {}
    for (i, _, _), (rej, fail, wt) in zip(units, outs):
        if i in agg:
            agg[i][0] += rej
            agg[i][1] += fail
            agg[i][2] += wt
        else:
            agg[i] = [rej.copy(), fail.copy(), wt]
    return agg


def _sort_key(coords):
    return tuple((0, v) if isinstance(v, (int, float)) else (1, str(v)) for v in coords.values())


def run_grid(grid: McGrid, jobs: int = 1) -> list:
    """Run every cell of ``grid``; rows are sorted by coordinates."""
    if int(jobs) != jobs or jobs < 1:
        raise ConfigurationError("jobs must be a positive integer")
    dgp_cells = list(grid.dgp_cells())
    for coords in dgp_cells:
        grid.dgp_config(coords)  # validate before any work
    tcells = list(grid.test_cells())
    agg = _run_dgp_cells(grid, dgp_cells, int(jobs))
    rows = []
    for i, coords in enumerate(dgp_cells):
        rej, fail, wt = agg[i]
        for k, tc in enumerate(tcells):
            rows.append(McCellResult(
                coordinates={**coords, **tc}, replications=grid.replications,
                rejections={lv: int(rej[k, j]) for j, lv in enumerate(grid.levels)},
                convergence_failures=int(fail[k]), wall_time=wt / len(tcells)))
    rows.sort(key=lambda r: _sort_key(r.coordinates))
    return rows


def run_cell(grid: McGrid, coordinates: dict) -> McCellResult:
    """One fully specified cell: ``coordinates`` fixes every DGP and test axis."""
    missing = set(DGP_AXES + TEST_AXES) - set(coordinates)
    if missing:
        raise ConfigurationError(f"cell is missing coordinates: {sorted(missing)}")
    single = {a: [coordinates[a]] for a in DGP_AXES}
    single.update(tau=[coordinates["tau"]], methods=[coordinates["method"]],
                  calibration=[coordinates["calibration"]])
    sub = McGrid(**{**asdict(grid), **single})
    return run_grid(sub, jobs=1)[0]


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def result_rows(results, levels) -> tuple[list, list]:
    """Header and string rows. Wall time is left out so output is reproducible."""
    header = list(DGP_AXES + TEST_AXES) + ["replications", "failures", "unreliable"]
    for lv in levels:
        header += [f"reject_{lv}", f"se_{lv}", f"reject_sens_{lv}"]
    rows = []
    for res in results:
        row = [_fmt(res.coordinates[a]) for a in DGP_AXES + TEST_AXES]
        row += [str(res.replications), str(res.convergence_failures), str(res.unreliable).lower()]
        for lv in levels:
            row += [f"{res.rejection_rate(lv):.6f}", f"{res.mc_std_error(lv):.6f}", f"{res.sensitivity_rate(lv):.6f}"]
        rows.append(row)
    return header, rows


def format_results(results, levels, fmt: str = "csv") -> str:
    header, rows = result_rows(results, levels)
    if fmt == "csv":
        import csv

        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        return buf.getvalue()
    if fmt == "table":
        return aligned_table(header, rows)
    raise ConfigurationError(f"unknown format {fmt!r}")


def aligned_table(header, rows) -> str:
    widths = [max(len(str(x)) for x in col) for col in zip(header, *rows)]
    lines = ["  ".join(str(x).rjust(w) for x, w in zip(r, widths)) for r in [header, *rows]]
    return "\n".join(lines) + "\n"
