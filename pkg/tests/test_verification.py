import math

import pytest

from newton_dual.exceptions import NoneFound
from newton_dual.services import verification
from newton_dual.services.verification import CHECKS, run_check


def test_check_registry():
    """Test that every check is registered under a unique name"""
    assert len(CHECKS) == 15
    assert "heun_kummer_identity" in CHECKS
    assert "scattering" in CHECKS


@pytest.mark.parametrize("name", ["algebraic_invariants", "k2_closed_form", "orbit_duality"])
def test_fast_checks_pass(name):
    """Test that the cheap checks pass with their default tolerances"""
    results = run_check(name)
    assert results
    assert all(r.passed for r in results)


def test_numerical_failure_becomes_failed_result(monkeypatch):
    """Test that a check raising a numerical error is reported, not raised"""

    def broken():
        raise NoneFound("nothing in window")

    monkeypatch.setitem(verification.CHECKS, "broken", broken)
    results = run_check("broken")
    assert len(results) == 1
    assert not results[0].passed
    assert math.isinf(results[0].value)
    assert "NoneFound" in results[0].detail


def test_value_error_becomes_failed_result(monkeypatch):
    """Test that a ValueError from outside the package hierarchy is also reported as a failed row"""

    def broken():
        raise ValueError("rtol too small")

    monkeypatch.setitem(verification.CHECKS, "broken", broken)
    results = run_check("broken")
    assert len(results) == 1
    assert not results[0].passed
    assert "ValueError" in results[0].detail


def test_floating_point_error_becomes_failed_result(monkeypatch):
    """Test that floating-point errors become failed rows"""

    def broken():
        raise FloatingPointError("overflow")

    monkeypatch.setitem(verification.CHECKS, "broken", broken)
    assert not run_check("broken")[0].passed


def test_three_term_set_cross_checks_the_oracle():
    """Test that the three-term dual set is checked against K2 and the finite-difference spectra"""
    results = run_check("three_term_set_k2")
    assert [r.name for r in results] == ["three_term_set_k2", "three_term_set_fd"]
    assert all(r.passed for r in results)
    assert results[1].tolerance == 1e-3


def test_scattering_check_uses_the_substitution_identity():
    """Test that the scattering check compares the oracle phase and the K2 substitution"""
    results = run_check("scattering")
    assert [r.name for r in results] == ["phase_shift_vs_fd", "k2_scattering_substitution"]
    assert all(r.passed for r in results)
