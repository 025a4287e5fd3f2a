"""Acceptance criteria 1-13 at their stated tolerances.

Each test prints one PASS/FAIL line.  All checks run twice with the same
seed; criterion 13 compares the two runs byte for byte.
"""
import pytest

from ssns.acceptance import CHECKS, determinism, run_checks


@pytest.fixture(scope="module")
def results():
    first = run_checks(seed=0)
    second = run_checks(seed=0)
    return {r.number: r for r in first}, determinism(first, second)


def _report(result, capsys):
    with capsys.disabled():
        print("\n" + result.line())
    assert result.passed, result.line()


@pytest.mark.parametrize("number", [c.number for c in CHECKS], ids=[f"criterion_{c.number:02d}" for c in CHECKS])
def test_criterion(number, results, capsys):
    _report(results[0][number], capsys)


def test_criterion_13_determinism(results, capsys):
    _report(results[1], capsys)
