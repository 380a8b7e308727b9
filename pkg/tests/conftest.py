import numpy as np
import pytest

from flagopt.bench import SUITE_DESCRIPTORS, cached_reference
from flagopt.generators import ProblemDescriptor, generate_problem


@pytest.fixture(scope="session")
def lasso_desc():
    return ProblemDescriptor()


@pytest.fixture(scope="session")
def lasso(lasso_desc):
    return generate_problem(lasso_desc)


@pytest.fixture(scope="session")
def lasso_ref(lasso_desc, lasso):
    return cached_reference(lasso_desc, 50_000, lasso)


@pytest.fixture(scope="session")
def suite_problems():
    return {name: generate_problem(desc) for name, desc in SUITE_DESCRIPTORS.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
