"""Quantile predictive regression inference with persistent regressors.

Split-sample empirical likelihood (EL) and IVX quantile tests of
no predictability, a multiplier bootstrap, simulation tools and a
Monte Carlo harness.
"""

from .bootstrap import BootstrapConfig, BootstrapResult, bootstrap_pvalue
from .core_stats import (DistributionRef, QuantileLevel, TestResult, chi_square_cdf, chi_square_quantile,
                         density_at_zero, psi_tau, self_weight)
from .data import EmpiricalReport, PredictorDataset, parse_dataset, run_empirical
from .dgp import DgpConfig, InnovationSpec, PersistenceSpec, TimeSeriesSample, simulate_system
from .el import el_confidence_region, el_log_ratio, el_statistic, el_test, score_panel, solve_lambda
from .exceptions import (CalibrationError, ConfigurationError, DataError, DegenerateRegressorError,
                         ExplosivePathError, NumericalError, QpredictError)
from .ivx import IvxConfig, build_instrument, ivx_qr_test
from .montecarlo import McCellResult, McGrid, run_cell, run_grid
from .qr import QuantileFit, fit_quantile_regression, self_weighted_qr

__version__ = "0.1.0"
