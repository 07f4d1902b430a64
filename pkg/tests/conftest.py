import numpy as np
import pytest

from daleel.dataset import to_design
from daleel.regress import LINEAR_BASIS, POLY_BASIS
from daleel.synthgen import default_scenario, generate

CATALOG_CSV = """name,series,vcpu,ecu,ram_gb,storage_gb,price_per_hour
t2.small,T2,1,var,2,20,0.026
t2.medium,T2,2,var,4,20,0.052
m3.medium,M3,1,3,3.75,4,0.070
m3.large,M3,2,6.5,7.5,32,0.140
c4.large,C4,2,8,3.75,20,0.116
c4.xlarge,C4,4,16,7.5,20,0.232
"""

ACCEPTANCE_LINES = []


@pytest.fixture
def catalog_path(tmp_path):
    p = tmp_path / "portfolio.csv"
    p.write_text(CATALOG_CSV)
    return p


@pytest.fixture(scope="session")
def default_runs():
    return generate(default_scenario(), seed=42)


@pytest.fixture(scope="session")
def poly_design(default_runs):
    return to_design(default_runs, POLY_BASIS)


@pytest.fixture(scope="session")
def linear_design(default_runs):
    return to_design(default_runs, LINEAR_BASIS)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
