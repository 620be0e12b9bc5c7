"""Acceptance criteria at their stated tolerances, one pass/fail line each."""
import pytest

from lortori.acceptance import CHECKS


@pytest.mark.parametrize("number", sorted(CHECKS), ids=lambda n: f"criterion_{n:02d}")
def test_criterion(number, capsys):
    result = CHECKS[number]()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()
