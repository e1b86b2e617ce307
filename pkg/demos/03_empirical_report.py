"""Empirical workflow on a synthetic monthly dataset.

No real dataset ships with the package, so this writes a 30-year monthly
file with one persistent and one noisy predictor, then runs the report
through the same parser the CLI uses.

Run: python demos/03_empirical_report.py [output_dir]
"""

import os
import sys

import numpy as np

from qpredict import DgpConfig, PersistenceSpec, simulate_system
from qpredict.data import PredictorDataset, parse_dataset, run_empirical

out = sys.argv[1] if len(sys.argv) > 1 else "."
n = 360
s = simulate_system(DgpConfig(n=n - 1, beta=0.15, persistence=PersistenceSpec(c=-2.0)), seed=2020)
noise = np.random.default_rng(1).standard_normal(n)
ds = PredictorDataset(np.arange(12 * 1990, 12 * 1990 + n), np.r_[s.y0, s.y] / 100, {"dp": s.x, "svar": noise})
path = os.path.join(out, "synthetic_monthly.csv")
ds.to_csv(path)

data = parse_dataset(path, {"date": "yyyymm", "return": "ret", "predictors": ["dp", "svar"]},
                     start="1990-01", end="2019-12")
print(f"{data.n_rows} months {data.date_range()[0]}..{data.date_range()[1]}, gaps: {data.gaps or 'none'}")
report = run_empirical(data, ["dp", "svar"], [0.1, 0.5, 0.9], ["el", "ivx"])
print(report.to_table())
print("same through the CLI:")
print(f"  qpredict empirical {path} --predictors dp,svar --tau 0.1,0.5,0.9 --format table")
