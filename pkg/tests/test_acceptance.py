"""Run every acceptance criterion and print one pass/fail line each."""

import pytest

from wskit.suite import CRITERIA, run_criterion


@pytest.mark.parametrize("number", [c[0] for c in CRITERIA])
def test_criterion(number):
    res = run_criterion(number, seed=0)
    print()
    print(res.line())
    assert res.passed, res.details
