import time

import pytest

from c0ip_control.afem import AfemConfig, run_afem
from c0ip_control.manufactured import example1
from c0ip_control.report import uniform_study

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


@pytest.fixture(scope="session")
def example1_study():
    """Uniform example1 hierarchy n = 4, 8, ..., 128 (levels 1..6), sigma = 20."""
    return uniform_study(example1(), levels=6, n0=4, sigma=20.0)


@pytest.fixture(scope="session")
def example1_study5():
    """The acceptance hierarchy n = 4..64 (5 levels) and its wall time in seconds."""
    start = time.perf_counter()
    study = uniform_study(example1(), levels=5, n0=4, sigma=20.0)
    return study, time.perf_counter() - start


@pytest.fixture(scope="session")
def example1_afem_timed():
    start = time.perf_counter()
    trace = run_afem(AfemConfig(theta=0.4, max_ndof=50_000, case="example1"))
    return trace, time.perf_counter() - start


@pytest.fixture(scope="session")
def example1_afem(example1_afem_timed):
    return example1_afem_timed[0]


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
