"""One test per acceptance criterion; a summary line for each is printed at
the end of the run (see conftest.py)."""
import pytest

from mmisim.acceptance import CRITERIA

RESULTS = []


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    result = CRITERIA[number]()
    RESULTS.append(result)
    assert result.passed, result.line()
