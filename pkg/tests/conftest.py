import numpy as np
import pytest

from qpredict.dgp import DgpConfig, InnovationSpec, PersistenceSpec, simulate_system


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_sample(n=500, c=-5.0, beta=0.0, gamma_lag=0.0, alpha=0.1, rho_uv=0.0, seed=0, **kw):
    cfg = DgpConfig(n=n, alpha=alpha, beta=beta, gamma_lag=gamma_lag,
                    persistence=PersistenceSpec(c=c, **kw), innovations=InnovationSpec(rho_uv=rho_uv))
    return simulate_system(cfg, seed)


def pytest_configure(config):
    config._criteria_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_criteria_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
