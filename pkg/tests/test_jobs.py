import math

import pytest

from newton_dual.exceptions import InputError, PartialResultWarning, VerificationFailure
from newton_dual.node_pool.tanh_sinh_pool import TanhSinhNodePool
from newton_dual.schemas.schemas import (
    CheckResult,
    ExpLogResponse,
    PhaseResponse,
    PhaseRow,
    PotentialSpec,
    RunConfig,
    VerifyResponse,
)
from newton_dual.services.jobs import Dualize, Heun, Orbit, Phase, Spectrum, Verify, outcome_error

OSCILLATOR = {"terms": [{"coeff": 1.0, "power": 2.0}]}


@pytest.fixture
def node_pool():
    return TanhSinhNodePool()


@pytest.mark.asyncio
async def test_dualize_two_term_potential(node_pool):
    """Test that r^2 - 1/r gives itself and two pivot images"""
    payload = {"potential": {"terms": [{"coeff": 1, "power": 2}, {"coeff": -1, "power": -1}]}}
    response = await Dualize(node_pool).run(payload, RunConfig(command="dualize"))
    assert len(response.members) == 3
    assert [m.pivot_index for m in response.members] == [None, 0, 1]
    assert response.warnings == []
    assert all(m.heun_reducible for m in response.members)
    assert outcome_error(response) is None


@pytest.mark.asyncio
async def test_dualize_flags_members_outside_heun_form(node_pool):
    """Test that members with no Heun reduction are kept but reported"""
    payload = {"potential": {"terms": [{"coeff": 1, "power": 2}, {"coeff": 1, "power": 3}]}}
    response = await Dualize(node_pool).run(payload, RunConfig(command="dualize"))
    assert response.warnings
    assert not response.members[0].heun_reducible
    assert isinstance(outcome_error(response), PartialResultWarning)


@pytest.mark.asyncio
async def test_dualize_exponential(node_pool):
    """Test that the exponential image carries eta = l(l+1)"""
    payload = {"potential": {"kind": "exponential", "xi": -1.0, "sigma": 2.0}, "state": {"E": -0.5, "l": 1}}
    response = await Dualize(node_pool).run(payload, RunConfig(command="dualize"))
    assert isinstance(response, ExpLogResponse)
    assert response.dual_potential.kind == "logsquared"
    assert response.dual_potential.eta == 2.0
    assert response.swapped["l(l+1)"] == 2.0
    assert abs(response.swapped["dual_l(l+1)"] - 0.25) < 1e-12


@pytest.mark.asyncio
async def test_dualize_rejects_unknown_kind(node_pool):
    """Test that an unknown potential kind is an input error"""
    with pytest.raises(InputError):
        await Dualize(node_pool).run({"potential": {"kind": "yukawa"}}, RunConfig(command="dualize"))


@pytest.mark.asyncio
async def test_verify_named_checks(node_pool):
    """Test that selected checks run and pass"""
    payload = {"checks": ["heun_kummer_identity", "k2_closed_form"]}
    response = await Verify(node_pool).run(payload, RunConfig(command="verify"))
    assert response.failed == 0
    assert response.passed == len(response.checks) >= 2
    assert outcome_error(response) is None


@pytest.mark.asyncio
async def test_verify_unknown_check(node_pool):
    """Test that unknown check names are rejected before anything runs"""
    with pytest.raises(InputError):
        await Verify(node_pool).run({"checks": ["no_such_check"]}, RunConfig(command="verify"))


@pytest.mark.asyncio
async def test_heun_regular_value(node_pool):
    """Test the terminating regular solution"""
    payload = {"kind": "regular", "params": {"alpha": 0.5, "gamma": 2.5}, "z": 1.7}
    response = await Heun(node_pool).run(payload, RunConfig(command="heun"))
    assert abs(response.value - 1) < 1e-14


@pytest.mark.asyncio
async def test_heun_k2_value(node_pool):
    """Test K2(2, 0, 0, 0) = Gamma(2) / Gamma(1)"""
    payload = {"kind": "K2", "params": {"alpha": 2.0}}
    response = await Heun(node_pool).run(payload, RunConfig(command="heun"))
    assert abs(response.value - 1) < 1e-6


@pytest.mark.asyncio
async def test_heun_needs_z(node_pool):
    """Test that function values need an argument"""
    with pytest.raises(InputError):
        await Heun(node_pool).run({"kind": "B", "params": {"alpha": 1.0}}, RunConfig(command="heun"))


@pytest.mark.asyncio
async def test_spectrum_matches_oracle(node_pool):
    """Test that K2 zeros and finite differences agree for the oscillator"""
    payload = {"potential": OSCILLATOR, "l": 0, "energy_window": [1.0, 12.5], "max_states": 3}
    response = await Spectrum(node_pool).run(payload, RunConfig(command="spectrum"))
    assert [round(row.E_K2, 8) for row in response.rows] == [3.0, 7.0, 11.0]
    assert all(row.rel_diff is not None and row.rel_diff < 1e-4 for row in response.rows)
    assert outcome_error(response) is None


@pytest.mark.asyncio
async def test_spectrum_over_several_l(node_pool):
    """Test that rows are grouped by l"""
    payload = {"potential": OSCILLATOR, "l": [1, 0], "energy_window": [1.0, 8.0], "max_states": 2}
    response = await Spectrum(node_pool).run(payload, RunConfig(command="spectrum"))
    assert response.l_values == [0.0, 1.0]
    assert [(row.l, round(row.E_K2, 8)) for row in response.rows] == [(0.0, 3.0), (0.0, 7.0), (1.0, 5.0)]


@pytest.mark.asyncio
async def test_spectrum_needs_window(node_pool):
    """Test that the energy window is required"""
    with pytest.raises(InputError):
        await Spectrum(node_pool).run({"potential": OSCILLATOR}, RunConfig(command="spectrum"))


@pytest.mark.asyncio
async def test_phase_matches_oracle(node_pool):
    """Test that -arg K2 and radial integration agree for a short-range tail"""
    payload = {"potential": {"terms": [{"coeff": -0.5, "power": -1.5}]}, "l": 0, "k": [1.0]}
    response = await Phase(node_pool).run(payload, RunConfig(command="phase"))
    assert len(response.rows) == 1
    assert response.rows[0].abs_diff < 2e-2


@pytest.mark.asyncio
async def test_phase_rejects_fractional_l(node_pool):
    """Test that phase shifts need an integer l"""
    payload = {"potential": {"terms": [{"coeff": -1, "power": -1}]}, "l": 0.5, "k": [1.0]}
    with pytest.raises(InputError):
        await Phase(node_pool).run(payload, RunConfig(command="phase"))


@pytest.mark.asyncio
async def test_orbit_of_oscillator(node_pool):
    """Test that the oscillator orbit maps onto a Kepler orbit"""
    payload = {"potential": OSCILLATOR, "E": 2.0, "L": 0.8, "n_steps": 400}
    response = await Orbit(node_pool).run(payload, RunConfig(command="orbit"))
    assert abs(response.apsidal_angle - math.pi / 2) < 1e-8
    assert abs(response.dual_apsidal_angle - math.pi) < 1e-8
    assert response.max_residual < 1e-2
    assert len(response.dual_points) == len(response.orbit.points)


def test_outcome_error_for_failed_checks():
    """Test that a failed check maps to a verification failure"""
    response = VerifyResponse(
        checks=[CheckResult(name="x", value=1.0, tolerance=0.1, passed=False)], passed=0, failed=1
    )
    assert isinstance(outcome_error(response), VerificationFailure)


def test_outcome_error_for_missing_oracle():
    """Test that rows without an oracle value give a partial result"""
    response = PhaseResponse(
        potential=PotentialSpec.polynomial([(-1.0, -1.0)]),
        l=0,
        rows=[PhaseRow(k=1.0, delta_K2=0.1, delta_oracle=None, abs_diff=None)],
        tolerance=2e-2,
    )
    assert isinstance(outcome_error(response), PartialResultWarning)
