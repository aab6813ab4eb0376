"""One test per acceptance criterion; each prints a pass/fail line."""

import pytest

from conftest import ACCEPTANCE_LINES
from purcellkit.acceptance import CHECKS


@pytest.mark.parametrize("number", sorted(CHECKS), ids=lambda n: f"criterion{n}")
def test_criterion(number):
    result = CHECKS[number]()
    line = result.line()
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert result.number == number
    assert result.passed, line
