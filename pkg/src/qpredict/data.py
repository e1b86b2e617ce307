"""Monthly predictor datasets and the empirical predictability report."""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bootstrap import BootstrapConfig, bootstrap_pvalue
from .core_stats import TestResult
from .dgp import TimeSeriesSample
from .el import el_test
from .exceptions import ConfigurationError, DataError, QpredictError
from .ivx import ivx_qr_test
from .qr import self_weighted_qr

MIN_ROWS = 60
MISSING_TOKENS = frozenset({"", "na", "nan", "null", "none", ".", "-"})
_YYYYMM = re.compile(r"^(\d{4})(\d{2})$")
_YYYY_MM = re.compile(r"^(\d{4})-(\d{2})$")


def parse_month(token) -> int:
    """Month index ``12 * year + (month - 1)`` from ``YYYYMM`` or ``YYYY-MM``."""
    s = str(token).strip()
    if s.endswith(".0"):  # spreadsheets often write 199001 as 199001.0
        s = s[:-2]
    m = _YYYYMM.match(s) or _YYYY_MM.match(s)
    if not m:
        raise DataError(f"unrecognized date {token!r}: expected YYYYMM or YYYY-MM")
    year, month = int(m.group(1)), int(m.group(2))
    if not 1 <= month <= 12:
        raise DataError(f"month out of range in date {token!r}")
    return 12 * year + month - 1


def format_month(index: int, style: str = "YYYY-MM") -> str:
    year, month = divmod(int(index), 12)
    return f"{year:04d}{month + 1:02d}" if style == "YYYYMM" else f"{year:04d}-{month + 1:02d}"


@dataclass
class PredictorDataset:
    """Aligned monthly series. ``dates`` holds month indices (see :func:`parse_month`)."""

    dates: np.ndarray
    excess_return: np.ndarray
    predictors: dict
    dropped_rows: int = 0
    gaps: list = field(default_factory=list)  # (before, after) month pairs that skip months

    def __post_init__(self):
        n = len(self.dates)
        if len(self.excess_return) != n or any(len(v) != n for v in self.predictors.values()):
            raise DataError("dataset columns have unequal lengths")
        if n > 1 and np.any(np.diff(self.dates) <= 0):
            raise DataError("non-monotone dates: months must be strictly increasing")

    @property
    def n_rows(self) -> int:
        return len(self.dates)

    def date_range(self) -> tuple[str, str]:
        return format_month(self.dates[0]), format_month(self.dates[-1])

    def subset(self, start=None, end=None) -> "PredictorDataset":
        lo = parse_month(start) if start is not None else -math.inf
        hi = parse_month(end) if end is not None else math.inf
        keep = (self.dates >= lo) & (self.dates <= hi)
        if keep.sum() < MIN_ROWS:
            raise DataError(f"only {int(keep.sum())} rows in the requested date range; need {MIN_ROWS}")
        d = self.dates[keep]
        return PredictorDataset(d, self.excess_return[keep], {k: v[keep] for k, v in self.predictors.items()},
                                self.dropped_rows, _find_gaps(d))

    def sample(self, predictor: str) -> TimeSeriesSample:
        """Pair ``x_{t-1}`` with ``y_t``: the first return becomes the initial lag ``y_0``."""
        if predictor not in self.predictors:
            raise DataError(f"missing predictor column {predictor!r}")
        r = self.excess_return
        return TimeSeriesSample(y=r[1:].copy(), x=self.predictors[predictor].copy(), y0=float(r[0]),
                                meta={"predictor": predictor})

    def to_csv(self, path=None, date_column: str = "yyyymm", return_column: str = "ret") -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        names = list(self.predictors)
        w.writerow([date_column, return_column, *names])
        for i in range(self.n_rows):
            w.writerow([format_month(self.dates[i], "YYYYMM"), repr(float(self.excess_return[i])),
                        *(repr(float(self.predictors[k][i])) for k in names)])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text


def _find_gaps(dates):
    idx = np.nonzero(np.diff(dates) > 1)[0]
    return [(format_month(dates[i]), format_month(dates[i + 1])) for i in idx]


def _to_float(tok):
    s = tok.strip()
    if s.lower() in MISSING_TOKENS:
        return math.nan
    try:
        return float(s)
    except ValueError:
        raise DataError(f"non-numeric value {tok!r}") from None


def parse_dataset(path, column_map: dict, start=None, end=None) -> PredictorDataset:
    """Read a delimited file with a header row.

    ``column_map`` has keys ``"date"`` and ``"return"`` (column names) and
    ``"predictors"`` (list of column names). The delimiter is sniffed among
    comma, semicolon and tab. Rows with a missing value in any requested
    column are dropped and counted.
    """
    for key in ("date", "return", "predictors"):
        if key not in column_map:
            raise ConfigurationError(f"column_map needs a {key!r} entry")
    preds = list(column_map["predictors"])
    if not preds:
        raise ConfigurationError("at least one predictor column is required")
    try:
        with open(path, newline="") as fh:
            text = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None
    try:
        dialect = csv.Sniffer().sniff(text.split("\n", 1)[0], delimiters=",;\t")
    except csv.Error:
        dialect = csv.excel
    reader = csv.reader(io.StringIO(text), dialect)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("empty file") from None
    wanted = [column_map["date"], column_map["return"], *preds]
    for col in wanted:
        if col not in header:
            raise DataError(f"missing required column {col!r}")
    pos = [header.index(c) for c in wanted]

    dates, vals, dropped = [], [], 0
    for line_no, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            raise DataError(f"line {line_no}: expected {len(header)} fields, got {len(row)}")
        cells = [row[p] for p in pos]
        nums = [_to_float(c) for c in cells[1:]]
        if cells[0].strip().lower() in MISSING_TOKENS or any(math.isnan(v) for v in nums):
            dropped += 1
            continue
        dates.append(parse_month(cells[0]))
        vals.append(nums)
    if not dates:
        raise DataError("no usable rows")
    d = np.asarray(dates, dtype=np.int64)
    if np.any(np.diff(d) <= 0):
        bad = int(np.argmax(np.diff(d) <= 0))
        raise DataError(f"non-monotone dates at {format_month(d[bad + 1])}")
    v = np.asarray(vals, dtype=float)
    if not np.all(np.isfinite(v)):
        raise DataError("infinite values in data")
    ds = PredictorDataset(d, v[:, 0], {p: v[:, i + 1] for i, p in enumerate(preds)}, dropped, _find_gaps(d))
    if start is not None or end is not None:
        return ds.subset(start, end)
    if ds.n_rows < MIN_ROWS:
        raise DataError(f"only {ds.n_rows} usable rows; need at least {MIN_ROWS}")
    return ds


@dataclass
class EmpiricalRow:
    predictor: str
    tau: float
    method: str
    calibration: str
    result: Optional[TestResult] = None
    coefficients: Optional[list] = None
    failure: Optional[str] = None


@dataclass
class EmpiricalReport:
    rows: list
    date_from: str
    date_to: str
    n_obs: int
    dynamic: bool

    HEADER = ("predictor", "tau", "method", "calibration", "dynamic", "statistic", "dof", "p_value",
              "alpha_hat", "beta_hat", "gamma_hat", "n", "date_from", "date_to", "status")

    def records(self) -> list:
        out = []
        for r in self.rows:
            coef = list(r.coefficients or [])
            coef += [None] * (3 - len(coef))
            res = r.result
            out.append([r.predictor, r.tau, r.method, r.calibration, self.dynamic,
                        None if res is None else res.statistic, None if res is None else res.dof,
                        None if res is None else res.p_value, *coef[:3], self.n_obs,
                        self.date_from, self.date_to, "ok" if r.failure is None else r.failure])
        return out

    def _strings(self, float_fmt):
        def f(v):
            if v is None:
                return ""
            if isinstance(v, bool):
                return str(v).lower()
            if isinstance(v, float):
                return float_fmt(v)
            return str(v)
        return [[f(v) for v in rec] for rec in self.records()]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.HEADER)
        w.writerows(self._strings(repr))
        return buf.getvalue()

    def to_table(self) -> str:
        from .montecarlo import aligned_table

        return aligned_table(list(self.HEADER), self._strings(lambda v: f"{v:.4f}"))


def _run_one(sample, tau, method, calibration, dynamic, bootstrap_config):
    if calibration == "bootstrap":
        return bootstrap_pvalue(sample, tau, method, {"dynamic": dynamic}, bootstrap_config).as_test_result(
            "joint" if dynamic else "beta_only")
    if method == "el":
        return el_test(sample, tau, "joint", dynamic=dynamic)
    return ivx_qr_test(sample, tau, dynamic=dynamic)


def run_empirical(dataset: PredictorDataset, predictors: Sequence[str], taus: Sequence[float],
                  methods: Sequence[str] = ("el", "ivx"), calibration: Sequence[str] = ("asymptotic",),
                  dynamic: bool = True, bootstrap: BootstrapConfig = BootstrapConfig()) -> EmpiricalReport:
    """Test every (predictor, tau, method, calibration) combination.

    A failing combination is kept in the report with its reason; the run
    carries on with the rest.
    """
    for m in methods:
        if m not in ("el", "ivx"):
            raise ConfigurationError(f"unknown method {m!r}")
    for cal in calibration:
        if cal not in ("asymptotic", "bootstrap"):
            raise ConfigurationError(f"unknown calibration {cal!r}")
    for p in predictors:
        if p not in dataset.predictors:
            raise DataError(f"missing predictor column {p!r}")
    rows = []
    for p in predictors:
        sample = dataset.sample(p)
        for tau in taus:
            try:
                coef = self_weighted_qr(sample, tau, dynamic=dynamic).coefficients.tolist()
            except QpredictError:
                coef = None
            for method in methods:
                for cal in calibration:
                    row = EmpiricalRow(p, float(tau), method, cal, coefficients=coef)
                    try:
                        row.result = _run_one(sample, tau, method, cal, dynamic, bootstrap)
                        if not row.result.converged:
                            row.failure = "not converged"
                    except QpredictError as exc:
                        row.failure = f"{type(exc).__name__}: {exc}"
                    rows.append(row)
    lo, hi = dataset.date_range()
    return EmpiricalReport(rows=rows, date_from=lo, date_to=hi, n_obs=dataset.n_rows - 1, dynamic=dynamic)
