import math

import numpy as np
import pytest

from newton_dual.exceptions import (
    MultiTermInput,
    NoneFound,
    PivotOutOfRange,
    PoleAtMinusThree,
    PreconditionViolated,
    UnsolvableAngular,
)
from newton_dual.schemas.schemas import PotentialSpec, PowerTerm, RadialState
from newton_dual.services.duality import (
    bound_state_exists,
    classical_dual,
    coordinate_exponent,
    dual_eigenvalue,
    dual_exponent,
    dual_set,
    dual_set_members,
    exp_log_dual,
    is_dual_pair,
    map_coordinate,
    map_wavefunction,
    polynomial_dual,
    power_dual_dimensions,
    power_dual_quantum,
    termwise_pair,
)
from newton_dual.services.spectra import ho_energy

HO = PotentialSpec.polynomial([(1.0, 2.0)])


def test_dual_exponent_values():
    """Test the dual pivot power for the classic pairs"""
    assert dual_exponent(2.0) == -1.0
    assert abs(dual_exponent(2 / 3) + 0.5) < 1e-15
    assert dual_exponent(6.0) == -1.5


def test_dual_exponent_is_an_involution():
    """Test that applying the map twice returns the power"""
    for q in np.linspace(-1.9, 8.0, 41):
        assert abs(dual_exponent(dual_exponent(q)) - q) < 1e-12


def test_dual_exponent_pole():
    """Test that power -2 has no dual"""
    with pytest.raises(PoleAtMinusThree):
        dual_exponent(-2.0)
    with pytest.raises(PoleAtMinusThree):
        coordinate_exponent(-2.0)
    assert "-2" in PoleAtMinusThree.__doc__
    assert "-1" not in PoleAtMinusThree.__doc__


def test_oscillator_to_coulomb():
    """Test the oscillator image: Coulomb coupling, energy and angular momentum"""
    v, state, m = polynomial_dual(HO, 0, RadialState(l=0, E=3.0))
    assert v.terms[0].power == -1.0
    assert v.terms[0].coeff == -0.75
    assert state.E == -0.25
    assert state.l == -0.25
    assert state.is_dual_image
    assert m.coord_exponent == 2.0
    assert m.energy_coupling_factor == 4.0
    assert m.wavefn_prefactor_exponent == -0.25


def test_non_pivot_exponent_relation():
    """Test (P+2) = (p+2)/s for the term that is not traded"""
    u = PotentialSpec.polynomial([(1.0, 2.0), (0.1, 6.0)])
    v, _, m = polynomial_dual(u, 0, RadialState(E=3.0))
    assert abs(v.terms[1].power - ((6.0 + 2) / m.coord_exponent - 2)) < 1e-15
    assert abs(v.terms[1].coeff - 0.1 / 4) < 1e-15


def test_pivot_validation():
    """Test that a pivot outside the term list is rejected"""
    with pytest.raises(PivotOutOfRange):
        polynomial_dual(HO, 1, RadialState(E=1.0))
    with pytest.raises(PreconditionViolated):
        polynomial_dual(PotentialSpec.exponential(-1.0, 2.0), 0, RadialState(E=-1.0))


def test_power_dual_needs_single_term():
    """Test that the power map rejects multi-term potentials"""
    u = PotentialSpec.polynomial([(1.0, 2.0), (-1.0, -1.0)])
    with pytest.raises(MultiTermInput):
        power_dual_quantum(u, RadialState(E=1.0))


def test_cross_dimensional_angular_momentum():
    """Test l + n/2 - 1 = s (l' + m/2 - 1) for a 3 -> 2 dimensional map"""
    v, state, m = power_dual_dimensions(HO, 3, 2, RadialState(l=0, E=3.0))
    assert v.dimension == 2
    assert m.dims == (3, 2)
    assert abs((0 + 3 / 2 - 1) - 2 * (state.l + 2 / 2 - 1)) < 1e-15


def test_map_coordinate():
    """Test rho = r^s for the oscillator and Coulomb-like pivots"""
    _, _, ho_map = polynomial_dual(HO, 0, RadialState(E=3.0))
    _, _, steep_map = polynomial_dual(PotentialSpec.polynomial([(-1.0, -1.5)]), 0, RadialState(E=-1.0))
    assert map_coordinate(ho_map, 2.0) == 4.0
    assert abs(map_coordinate(steep_map, 16.0) - 2.0) < 1e-14


def test_map_wavefunction_oscillator_ground_state():
    """Test that r e^(-r^2/2) maps to rho^(3/4) e^(-rho/2)"""
    _, _, m = polynomial_dual(HO, 0, RadialState(E=3.0))
    r = np.linspace(0.05, 4.0, 200)
    mapped = map_wavefunction(m, list(zip(r, r * np.exp(-r * r / 2))))
    rho = np.array([p[0] for p in mapped])
    v = np.array([p[1] for p in mapped])
    expected = rho**0.75 * np.exp(-rho / 2)
    expected = expected / expected[np.argmax(np.abs(expected))]
    assert np.allclose(rho, r * r)
    assert np.allclose(v, expected, rtol=1e-12, atol=1e-14)


def test_map_wavefunction_rejects_origin():
    """Test that samples at r <= 0 are rejected"""
    _, _, m = polynomial_dual(HO, 0, RadialState(E=3.0))
    with pytest.raises(PreconditionViolated):
        map_wavefunction(m, [(0.0, 0.0), (1.0, 0.5)])


def test_dual_set_sizes():
    """Test that N terms give N + 1 pairwise dual members"""
    assert len(dual_set(HO)) == 2
    assert len(dual_set(PotentialSpec.polynomial([(1.0, 2.0), (-1.0, -1.0)]))) == 3
    assert len(dual_set(PotentialSpec.polynomial([(1.0, 2.0), (-1.0, -1.0), (0.5, 1.0)]))) == 4


def test_dual_set_relations():
    """Test the coefficient relations recorded for each member"""
    members = dual_set_members(PotentialSpec.polynomial([(1.0, 2.0), (-1.0, -1.0)]))
    assert members[0].pivot_index is None
    harmonic = members[1].relations
    assert harmonic["coord_exponent"] == 2.0
    assert harmonic["energy_coupling_factor"] == 4.0
    assert harmonic["dual_energy"] == -0.25
    coulomb = members[2].relations
    assert coulomb["coord_exponent"] == 0.5
    assert coulomb["dual_energy"] == 4.0


def test_is_dual_pair():
    """Test the pair relation both ways and against an unrelated potential"""
    state = RadialState(l=0, E=3.0)
    v, dual_state, _ = polynomial_dual(HO, 0, state)
    assert is_dual_pair(HO, state, v, dual_state)
    assert is_dual_pair(v, dual_state, HO, state)
    other = PotentialSpec.polynomial([(-0.5, -1.0)])
    assert not is_dual_pair(HO, state, other, dual_state)


def test_termwise_pair_keeps_its_form():
    """Test the self-dual two-term family"""
    u, v = termwise_pair(2.0, 1.0, 0.5)
    assert abs(u.terms[1].power - 2 * (math.sqrt(2) - 1)) < 1e-15
    assert abs(v.terms[1].power - 2 * (math.sqrt(0.5) - 1)) < 1e-12
    assert abs(v.terms[1].coeff - 0.5 / 4) < 1e-12
    _, classical = termwise_pair(2.0, 1.0, 0.5, quantum=False)
    assert abs(classical.terms[1].coeff - 0.5) < 1e-12


def test_classical_dual_of_oscillator():
    """Test the classical map: eta = -E, E' = -xi, same L"""
    v, cmap = classical_dual(HO, 2.0, 0.8)
    assert v.terms[0].coeff == -2.0
    assert v.terms[0].power == -1.0
    assert cmap.dual_energy == -1.0
    assert cmap.L == 0.8
    assert not cmap.duality.quantum


def test_bound_state_exists():
    """Test the attractive-power existence window"""
    assert bound_state_exists(PowerTerm(coeff=-1.0, power=-1.0))
    assert bound_state_exists(PowerTerm(coeff=-1.0, power=-1.5))
    assert not bound_state_exists(PowerTerm(coeff=-1.0, power=-2.5))
    assert not bound_state_exists(PowerTerm(coeff=1.0, power=-1.0))


def test_exp_log_round_trip():
    """Test that exp -> log -> exp returns the input potential and state"""
    u = PotentialSpec.exponential(xi=-1.0, sigma=2.0)
    state = RadialState(l=1, E=-2.0)
    v, dual_state, m = exp_log_dual(u, state, alpha_scale=1.0)
    assert v.kind == "logsquared"
    assert v.eta == 2.0
    assert dual_state.E == 1.0
    assert abs(dual_state.l - (-0.5 + math.sqrt(2))) < 1e-15
    assert m.direction == "exp_to_log"
    w, back, _ = exp_log_dual(v, dual_state, sigma=2.0)
    assert abs(w.xi - u.xi) < 1e-12
    assert abs(back.E - state.E) < 1e-12
    assert abs(back.l - state.l) < 1e-12


def test_exp_log_needs_nonpositive_energy():
    """Test that E > 0 has no log-squared image"""
    with pytest.raises(UnsolvableAngular):
        exp_log_dual(PotentialSpec.exponential(-1.0, 2.0), RadialState(l=0, E=0.5))


def test_dual_eigenvalue_coulomb_from_oscillator():
    """Test the Coulomb ground state obtained by inverting the oscillator spectrum"""
    _, _, m = polynomial_dual(HO, 0, RadialState(l=0, E=3.0))
    coulomb = PotentialSpec.polynomial([(-1.0, -1.0)])

    def solver(n_r, l, couplings):
        return ho_energy(couplings[0], n_r, l)

    E = dual_eigenvalue(solver, m, RadialState(l=0, n_r=0, E=-0.25), coulomb)
    assert abs(E + 0.25) < 1e-12
    excited = dual_eigenvalue(solver, m, RadialState(l=0, n_r=1, E=-0.0625), coulomb)
    assert abs(excited + 1 / 16) < 1e-12


def test_constant_term_must_be_absorbed():
    """Test that a non-pivot constant term is rejected instead of colliding with the pivot image"""
    u = PotentialSpec.polynomial([(1.0, 2.0), (0.5, 0.0)])
    with pytest.raises(PreconditionViolated):
        polynomial_dual(u, 0, RadialState(E=3.0))


def test_dual_eigenvalue_skips_typed_solver_failures():
    """Test that solver errors from the package are skipped while the coupling is bracketed"""
    _, _, m = polynomial_dual(HO, 0, RadialState(l=0, E=3.0))
    coulomb = PotentialSpec.polynomial([(-1.0, -1.0)])

    def solver(n_r, l, couplings):
        if couplings[0] < 2.0**-12:
            raise NoneFound("no level below the window")
        return ho_energy(couplings[0], n_r, l)

    E = dual_eigenvalue(solver, m, RadialState(l=0, n_r=0, E=-0.25), coulomb)
    assert abs(E + 0.25) < 1e-12


def test_dual_eigenvalue_propagates_unexpected_errors():
    """Test that a solver bug is not swallowed by the bracket search"""
    _, _, m = polynomial_dual(HO, 0, RadialState(l=0, E=3.0))
    coulomb = PotentialSpec.polynomial([(-1.0, -1.0)])

    def solver(n_r, l, couplings):
        raise RuntimeError("solver bug")

    with pytest.raises(RuntimeError):
        dual_eigenvalue(solver, m, RadialState(l=0, n_r=0, E=-0.25), coulomb)
