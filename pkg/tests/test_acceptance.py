"""Acceptance gate: every numbered check at its stated tolerance.

Each test runs one criterion end to end at full desk scale and prints
its pass/fail line; run with -s (or read the failure message) to see
the measured values. `-m "acceptance and not slow"` keeps just the
sub-minute checks.
"""
import pytest

from bkl_lab import acceptance

pytestmark = pytest.mark.acceptance


def _run(number):
    res = acceptance.CRITERIA[number](seed=0)
    print(res.line())
    assert res.passed, res.line()


def test_01_gw_survival_closed_form():
    _run(1)


def test_02_mass_extinction_far_field():
    _run(2)


def test_03_singular_profile_residual():
    _run(3)


@pytest.mark.slow
def test_04_killed_survival_functional():
    _run(4)


@pytest.mark.slow
def test_05_exit_above_asymptotics():
    _run(5)


@pytest.mark.slow
def test_06_scaled_survival_vs_profile():
    _run(6)


@pytest.mark.slow
def test_07_survival_exponent_and_linearity():
    _run(7)


@pytest.mark.slow
def test_08_max_tail_constant():
    _run(8)


@pytest.mark.slow
def test_09_scaled_max_tail_plateau():
    _run(9)


@pytest.mark.slow
def test_10_snapshot_max_conditional_law():
    _run(10)


def test_11_invariant_suites():
    _run(11)
