import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from drawdown_dividends.models import TransformModel

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

# mu = 0, sigma^2 = 2, q = 1: W = sinh, nu = coth
SINH = TransformModel.bm(0.0, np.sqrt(2.0), 1.0)
LEVY = TransformModel.bm(1.0, 1.0, 0.1)
GBM1 = TransformModel.gbm(1.0, 1.0, 1.0, 1.0)

mus = st.floats(-2.0, 2.0)
sigmas = st.floats(0.3, 3.0)
qs = st.floats(0.02, 2.0)


@pytest.fixture
def sinh_model():
    return SINH


@pytest.fixture
def levy_model():
    return LEVY


@pytest.fixture
def gbm_model():
    return GBM1


ACCEPTANCE_LINES = []


def report(criterion: int, passed: bool, detail: str):
    line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
