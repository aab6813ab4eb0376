import numpy as np
import pytest

from purcellkit.params import SystemParams
from purcellkit.reference import TABLE_ROWS, table_row


@pytest.fixture
def row1() -> SystemParams:
    return table_row(1).params()


@pytest.fixture
def row9() -> SystemParams:
    return table_row(9).params()


@pytest.fixture(params=range(1, len(TABLE_ROWS) + 1), ids=lambda n: f"row{n}")
def table_params(request) -> SystemParams:
    return table_row(request.param).params()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
