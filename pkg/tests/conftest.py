import time

import pytest

from plapshoot.ivp import ProblemParams
from plapshoot.model import landmarks, make_power_family
from plapshoot.shoot import find_lambda_k

# one line per acceptance criterion, filled by test_acceptance.py
ACCEPTANCE_LINES = {}
# wall time of the shared node search
TIMINGS = {}


@pytest.fixture(scope="session")
def ref_nl():
    return make_power_family(1.5, 4.0, 2.0, 3.0)


@pytest.fixture(scope="session")
def sec_nl():
    return make_power_family(2.0, 4.0, 2.5, 3.0)


@pytest.fixture(scope="session")
def ref_lm(ref_nl):
    return landmarks(ref_nl)


@pytest.fixture(scope="session")
def node_solutions(ref_nl):
    """k = 0..3 compactly supported solutions of the reference instance."""
    params = ProblemParams(3.0, 2.0, 1.0, r_max=None)
    t0 = time.perf_counter()
    sols = [find_lambda_k(k, params, ref_nl) for k in range(4)]
    TIMINGS["node_solutions"] = time.perf_counter() - t0
    return sols


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
