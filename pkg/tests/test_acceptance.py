"""Acceptance suite: every criterion at its stated tolerance.

Each test prints the criterion's pass/fail line (visible with pytest -s) and
asserts it.  Expensive simulations are shared across criteria via the module
cache in decaylab.acceptance.
"""

from __future__ import annotations

import pytest

from decaylab import acceptance


@pytest.mark.parametrize("number", sorted(acceptance.CRITERIA))
def test_criterion(number):
    result = acceptance.run_criterion(number)
    print(result.line())
    assert result.passed, result.details
