import cmath
import math

import mpmath
import numpy as np
import pytest

from newton_dual.exceptions import Indeterminate, PreconditionViolated, QuadratureFailed
from newton_dual.schemas.schemas import HeunParams, PotentialSpec, QuadratureControl
from newton_dual.services.connection import (
    ClosedFormConnection,
    QuadratureConnection,
    j_integral,
    k1,
    k2,
    k2_asymptotic,
    k2_closed_beta0_delta0,
    s_matrix,
    select_connection,
    tanh_sinh_integrate,
)
from newton_dual.services.spectra import reduce_to_heun


def test_closed_form_values():
    """Test the Gamma-ratio K2 at a regular point and at a pole"""
    assert abs(k2_closed_beta0_delta0(2, -2) - 2 / math.sqrt(math.pi)) < 1e-14
    assert k2_closed_beta0_delta0(1, 3) == 0


def test_closed_form_zeros_at_oscillator_levels():
    """Test that K2 vanishes at E = 2(2 n_r + l) + 3 for the oscillator parameters"""
    for l in (0, 1, 2):
        for n_r in (0, 1, 2):
            assert k2_closed_beta0_delta0(2 * l + 1, 4 * n_r + 2 * l + 3) == 0


def test_j_integral_of_constant_solution():
    """Test J against Gaussian moments when N = 1"""
    p = HeunParams(alpha=0.5, gamma=2.5)
    assert abs(j_integral(1.0, p) - math.sqrt(math.pi) / 2) < 1e-10
    assert abs(j_integral(1.5, p) - 0.5 * math.gamma(0.75)) < 1e-10


def test_j_integral_rejects_nonpositive_lambda():
    """Test that Re(lambda) <= 0 is rejected"""
    with pytest.raises(PreconditionViolated):
        j_integral(0.0, HeunParams(alpha=0.5, gamma=2.5))


@pytest.mark.parametrize("alpha", [1, 2, 3, 5])
@pytest.mark.parametrize("gamma", [-2, -1, 0, 1, 4])
def test_k2_quadrature_matches_closed_form(alpha, gamma):
    """Test the quadrature K2 against the Gamma ratio away from its zeros"""
    exact = k2_closed_beta0_delta0(alpha, gamma)
    if exact == 0:
        pytest.skip("closed form vanishes")
    value = k2(HeunParams(alpha=alpha, gamma=gamma))
    assert abs(value - exact) <= 1e-6 * abs(exact)


def test_k2_asymptotic_with_vanishing_odd_coefficients():
    """Test N / H+ when every odd expansion coefficient is zero"""
    value = k2_asymptotic(HeunParams(alpha=0.5, gamma=1.5))
    assert abs(value - 0.25) < 1e-9


def test_k2_matches_direct_matching():
    """Test the J-integral K2 against N / H+ at the matching radius"""
    p = HeunParams(alpha=2.0, gamma=0.0)
    direct = k2_asymptotic(p)
    assert abs(k2(p) - direct) <= 1e-6 * abs(direct)


@pytest.mark.parametrize("k", [0.5, 1.0, 2.0])
def test_scattering_substitution_identity(k):
    """Test conj K2(4l+2,0,0,8 lam) = K2(4l+2,0,0,-8i lam) at the lam of -0.5/r^1.5"""
    red = reduce_to_heun(PotentialSpec.polynomial([(-0.5, -1.5)]), 0, k * k)
    assert abs(cmath.phase(red.c) + math.pi / 4) < 1e-14
    lam = red.heun.delta / 8
    assert abs(lam + 0.5 / red.c) < 1e-14
    assert abs(lam.conjugate() + 1j * lam) < 1e-14 * abs(lam)

    value = k2(red.heun)
    swapped = k2(HeunParams(alpha=red.heun.alpha, delta=-8j * lam))
    assert abs(value.conjugate() - swapped) <= 1e-8 * abs(value)
    assert abs(s_matrix(red.heun) - swapped / value) < 1e-8


def test_k1_does_not_depend_on_matching_point():
    """Test that K1 of bound-state parameters is the same at z = 5, 6, 7"""
    for p, expected in ((HeunParams(alpha=1.0, gamma=7.0), -2 / 3), (HeunParams(alpha=2.0, gamma=8.0), -0.5)):
        for z in (5.0, 6.0, 7.0):
            result = k1(p, z_match=z)
            assert abs(result.value - expected) < 1e-12, (p, z)
            assert result.conditioning == 0


def test_quadrature_failure_reports_last_change():
    """Test that a missed tolerance reports the difference between the last two levels"""
    with pytest.raises(QuadratureFailed) as exc:
        tanh_sinh_integrate(lambda x: np.cos(50 * x), 1.0, QuadratureControl(max_levels=1))
    message = str(exc.value)
    assert "nan" not in message
    assert "0.000e+00" not in message

def test_k2_indeterminate_at_dual_pole():
    """Test that 1 + (alpha+gamma)/2 at a non-positive integer raises Indeterminate"""
    with pytest.raises(Indeterminate):
        k2(HeunParams(alpha=1.0, gamma=-5.0))


def test_coulomb_phase_from_k2():
    """Test that -arg K2 of the Coulomb reduction is the Coulomb phase"""
    k, xi = 1.0, -1.0
    c2 = -2j * k
    p = HeunParams(alpha=2.0, gamma=-xi / (0.25 * c2))
    value = select_connection(p).connection_coefficient(p)
    delta = -math.atan2(value.imag, value.real)
    expected = float(mpmath.arg(mpmath.gamma(1 + 1j * xi / (2 * k))))
    assert abs(math.remainder(delta - expected, 2 * math.pi)) < 1e-8


def test_s_matrix_is_phase():
    """Test S = exp(2 i delta) with delta = -arg K2"""
    p = HeunParams(alpha=2.0, gamma=2.0j)
    value = k2(p)
    delta = -math.atan2(value.imag, value.real)
    s = s_matrix(p)
    assert abs(abs(s) - 1) < 1e-12
    assert abs(s - complex(math.cos(2 * delta), math.sin(2 * delta))) < 1e-10


def test_k1_of_terminating_solution():
    """Test that N = B+ gives K1 = 1 with no growing part"""
    result = k1(HeunParams(alpha=0.5, gamma=2.5))
    assert abs(result.value - 1) < 1e-10
    assert result.conditioning == 0


def test_select_connection():
    """Test that the closed form is chosen exactly when beta = delta = 0"""
    assert isinstance(select_connection(HeunParams(alpha=1.0, gamma=2.0)), ClosedFormConnection)
    assert isinstance(select_connection(HeunParams(alpha=1.0, gamma=2.0, delta=0.1)), QuadratureConnection)
    with pytest.raises(PreconditionViolated):
        ClosedFormConnection().connection_coefficient(HeunParams(alpha=1.0, beta=0.5))
