"""Acceptance suite: one test per criterion, each reporting a pass/fail line."""
import pytest

from conftest import ACCEPTANCE_LINES
from coupledsft.acceptance import CRITERIA, format_result, run_criterion


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, request):
    result = run_criterion(number)
    line = format_result(result)
    print(line)
    request.config.stash[ACCEPTANCE_LINES].append(line)  # echoed in the terminal summary
    assert result.passed, line
