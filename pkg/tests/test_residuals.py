import sympy as sp

from newton_dual.schemas.schemas import PotentialSpec, RadialState
from newton_dual.services.duality import exp_log_dual, polynomial_dual, power_dual_dimensions
from newton_dual.services.residuals import schwarzian, transformed_equation_residual

HO = PotentialSpec.polynomial([(1.0, 2.0)])


def test_schwarzian_of_power():
    """Test S(rho^a) = (1 - a^2) / (2 rho^2)"""
    rho = sp.Symbol("rho", positive=True)
    a = sp.Rational(1, 2)
    assert sp.simplify(schwarzian(rho**a, rho) - (1 - a**2) / (2 * rho**2)) == 0


def test_oscillator_coulomb_residual():
    """Test that the oscillator equation maps onto the Coulomb equation"""
    state = RadialState(l=0, E=3.0)
    v, dual_state, m = polynomial_dual(HO, 0, state)
    assert transformed_equation_residual(HO, state, m, v, dual_state) < 1e-10


def test_multi_term_residual():
    """Test a two-term pair with a non-integer angular momentum"""
    u = PotentialSpec.polynomial([(1.0, 2.0), (-1.0, -1.0)])
    state = RadialState(l=1, E=2.5)
    for pivot in (0, 1):
        v, dual_state, m = polynomial_dual(u, pivot, state)
        assert transformed_equation_residual(u, state, m, v, dual_state) < 1e-10


def test_cross_dimensional_residual():
    """Test the 3 -> 2 dimensional oscillator map"""
    state = RadialState(l=0, E=3.0)
    v, dual_state, m = power_dual_dimensions(HO, 3, 2, state)
    assert transformed_equation_residual(HO, state, m, v, dual_state) < 1e-10


def test_exp_log_residual():
    """Test the exponential to log-squared map"""
    u = PotentialSpec.exponential(xi=-1.0, sigma=2.0)
    state = RadialState(l=1, E=-2.0)
    v, dual_state, m = exp_log_dual(u, state, alpha_scale=1.3)
    assert transformed_equation_residual(u, state, m, v, dual_state) < 1e-8


def test_residual_detects_wrong_partner():
    """Test that a mismatched dual potential leaves a visible residual"""
    state = RadialState(l=0, E=3.0)
    _, dual_state, m = polynomial_dual(HO, 0, state)
    wrong = PotentialSpec.polynomial([(-0.5, -1.0)])
    assert transformed_equation_residual(HO, state, m, wrong, dual_state) > 1e-3
