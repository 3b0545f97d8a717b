import numpy as np
import pytest

from nashbench.games import GameSpec, make_oracle

# Verdict lines appended by the acceptance tests; echoed after the run so
# they are visible regardless of output capturing.
acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(scope="session")
def saddle_oracle():
    return make_oracle(GameSpec(kind="saddle").validate())


@pytest.fixture(scope="session")
def saddle_small():
    return make_oracle(GameSpec(kind="saddle", resolution=7).validate())


@pytest.fixture(scope="session")
def rps_oracle():
    return make_oracle(GameSpec(kind="rps").validate())


@pytest.fixture(scope="session")
def hotelling_oracle():
    return make_oracle(GameSpec(kind="hotelling", resolution=11).validate())


@pytest.fixture(scope="session")
def budget_oracle():
    return make_oracle(GameSpec(kind="budget").validate())
