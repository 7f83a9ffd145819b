"""Benchmark criteria, each at its stated threshold.

Every test prints a single ``[PASS]``/``[FAIL]`` line before asserting, so a
plain ``pytest`` run shows the full scorecard even when a criterion fails.
"""

import pytest

from kinecluster.experiments import CRITERIA

pytestmark = pytest.mark.slow


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number, capsys):
    result = CRITERIA[number]()
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()
