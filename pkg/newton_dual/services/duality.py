"""Newton duality transforms.

Powers are stored literally: a term xi*r^q has power q = a+1. Trading a pivot term
xi*r^q with the energy gives the coordinate map rho = r^s with s = (q+2)/2 = (a+3)/2,
the dual pivot power Q = 2/s - 2 (so (a+3)(A+3) = 4) and, for the quantum map,

    eta = -E / s^2,  E_dual = -xi / s^2,  lambda_n = mu_n / s^2,
    (P_n + 2) = (p_n + 2) / s for every other term,
    l + n/2 - 1 = s (l_dual + m/2 - 1),  u(r) = rho^(Q/4) v(rho).

The classical map is the same without the 1/s^2 factors and keeps L.
"""

import math
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from scipy.optimize import brentq

from newton_dual.exceptions import (
    MultiTermInput,
    NewtonDualError,
    NoBracket,
    NonMonotone,
    PivotOutOfRange,
    PoleAtMinusThree,
    PreconditionViolated,
    UnsolvableAngular,
    VerificationFailure,
)
from newton_dual.schemas.schemas import (
    ClassicalMap,
    DualityMap,
    DualSetMember,
    ExpLogMap,
    PotentialSpec,
    PowerTerm,
    RadialState,
)

POLE_TOL = 1e-14
PAIR_TOL = 1e-9

AnyMap = Union[DualityMap, ClassicalMap, ExpLogMap]
EnergySolver = Callable[[int, float, Sequence[float]], float]


def dual_exponent(a_plus_1: float) -> float:
    """Literal power of the dual pivot: A+1 = 4/(a+3) - 2"""
    if abs(a_plus_1 + 2) < POLE_TOL:
        raise PoleAtMinusThree("Power -2 (a = -3) is the pole of the duality map")
    return 4 / (a_plus_1 + 2) - 2


def coordinate_exponent(a_plus_1: float) -> float:
    """s = (a+3)/2 in rho = r**s"""
    if abs(a_plus_1 + 2) < POLE_TOL:
        raise PoleAtMinusThree("Power -2 (a = -3) is the pole of the duality map")
    return (a_plus_1 + 2) / 2


def effective_angular(l: float, dimension: int) -> float:
    """l + n/2 - 1, the quantity scaled by the duality in n dimensions"""
    return l + dimension / 2 - 1


def bound_state_exists(term: PowerTerm) -> bool:
    """Whether a single attractive power supports E < 0 bound states (-2 < power < 0)"""
    coeff = term.coeff.real
    return -2 < term.power < 0 and coeff < 0


def _require_polynomial(u: PotentialSpec) -> None:
    if u.kind != "polynomial":
        raise PreconditionViolated(f"Power duality needs a polynomial potential, got {u.kind}")


def _dual_terms(u: PotentialSpec, pivot: int, energy: float, factor: float) -> Tuple[List[PowerTerm], float, float]:
    _require_polynomial(u)
    if not 0 <= pivot < len(u.terms):
        raise PivotOutOfRange(f"Pivot {pivot} outside 0..{len(u.terms) - 1}")
    pivot_term = u.terms[pivot]
    s = coordinate_exponent(pivot_term.power)
    terms = []
    for i, t in enumerate(u.terms):
        if i == pivot:
            terms.append(PowerTerm(coeff=-energy / factor, power=dual_exponent(t.power)))
        elif abs(t.power) < 1e-12:
            # Its image would share the power of the pivot image.
            raise PreconditionViolated(f"Absorb the constant term {t.coeff} into E before dualising on pivot {pivot}")
        else:
            terms.append(PowerTerm(coeff=t.coeff / factor, power=(t.power + 2) / s - 2))
    dual_energy = -pivot_term.coeff / factor
    if dual_energy.imag != 0:
        raise PreconditionViolated(f"Pivot coupling {pivot_term.coeff} must be real to act as an energy")
    return terms, dual_energy.real, s


def polynomial_dual(
    u: PotentialSpec, pivot: int, state: RadialState, m_dims: Optional[int] = None
) -> Tuple[PotentialSpec, RadialState, DualityMap]:
    """Quantum dual of a polynomial potential with the given pivot term"""
    n = state.dimension
    m = m_dims if m_dims is not None else n
    if n < 1 or m < 1:
        raise PreconditionViolated(f"Dimensions must be positive, got n={n}, m={m}")
    _require_polynomial(u)
    if not 0 <= pivot < len(u.terms):
        raise PivotOutOfRange(f"Pivot {pivot} outside 0..{len(u.terms) - 1}")
    s = coordinate_exponent(u.terms[pivot].power)
    factor = s * s
    terms, dual_energy, _ = _dual_terms(u, pivot, state.E, factor)
    dual_l = effective_angular(state.l, n) / s - m / 2 + 1
    dual_map = DualityMap(
        coord_exponent=s,
        energy_coupling_factor=factor,
        angular_scale=1 / s,
        wavefn_prefactor_exponent=dual_exponent(u.terms[pivot].power) / 4,
        pivot_index=pivot,
        dims=(n, m),
        quantum=True,
    )
    v = PotentialSpec(kind="polynomial", terms=tuple(terms), dimension=m)
    dual_state = RadialState(dimension=m, l=dual_l, n_r=state.n_r, E=dual_energy, is_dual_image=True)
    logger.debug(f"Dual of {u.describe()} (pivot {pivot}) -> {v.describe()}, E'={dual_energy:.12g}, l'={dual_l:.12g}")
    return v, dual_state, dual_map


def power_dual_quantum(u: PotentialSpec, state: RadialState) -> Tuple[PotentialSpec, RadialState, DualityMap]:
    if len(u.terms) != 1:
        raise MultiTermInput(f"Power duality takes a single term, got {len(u.terms)}")
    if state.dimension != 3:
        raise PreconditionViolated("power_dual_quantum is the three-dimensional map; use power_dual_dimensions")
    return polynomial_dual(u, 0, state)


def power_dual_dimensions(
    u: PotentialSpec, n: int, m: int, state: RadialState
) -> Tuple[PotentialSpec, RadialState, DualityMap]:
    """Power duality from n to m dimensions; couplings and energies map as in 3D"""
    if len(u.terms) != 1:
        raise MultiTermInput(f"Power duality takes a single term, got {len(u.terms)}")
    if n < 1 or m < 1:
        raise PreconditionViolated(f"Dimensions must be positive, got n={n}, m={m}")
    return polynomial_dual(u.with_dimension(n), 0, state.model_copy(update={"dimension": n}), m_dims=m)


def classical_dual(u: PotentialSpec, E: float, L: float, pivot: int = 0) -> Tuple[PotentialSpec, ClassicalMap]:
    """Classical dual: eta = -E, E_dual = -xi, other couplings unchanged, same L"""
    terms, dual_energy, s = _dual_terms(u, pivot, E, 1.0)
    v = PotentialSpec(kind="polynomial", terms=tuple(terms), dimension=u.dimension)
    duality = DualityMap(
        coord_exponent=s,
        energy_coupling_factor=1.0,
        angular_scale=1.0,
        wavefn_prefactor_exponent=0.0,
        pivot_index=pivot,
        dims=(u.dimension, u.dimension),
        quantum=False,
    )
    return v, ClassicalMap(coord_exponent=s, pivot_index=pivot, dual_energy=dual_energy, L=L, duality=duality)


def termwise_pair(
    a_plus_1: float, xi: float, mu: float, quantum: bool = True, E: float = 1.0
) -> Tuple[PotentialSpec, PotentialSpec]:
    """The self-dual two-term family xi r^q + mu r^(2(sqrt(s)-1)), s = (q+2)/2.

    Its dual keeps the same form; the second coefficient becomes mu ((A+3)/2)^2 in the
    quantum case and stays mu in the classical case.
    """
    s = coordinate_exponent(a_plus_1)
    if s <= 0:
        raise PreconditionViolated(f"Termwise pairs need (a+3)/2 > 0, got {s}")
    u = PotentialSpec.polynomial([(xi, a_plus_1), (mu, 2 * (math.sqrt(s) - 1))])
    if quantum:
        v, _, _ = polynomial_dual(u, 0, RadialState(E=E))
    else:
        v, _ = classical_dual(u, E, L=1.0)
    second = v.terms[1]
    big_s = 1 / s
    expected_power = 2 * (math.sqrt(big_s) - 1)
    expected_coeff = mu * big_s**2 if quantum else mu
    if abs(second.power - expected_power) > 1e-12 or abs(second.coeff - expected_coeff) > 1e-12 * max(1.0, abs(mu)):
        raise VerificationFailure(f"Termwise dual lost its form: {v.describe()}")
    return u, v


def _same_terms(a: Sequence[PowerTerm], b: Sequence[PowerTerm], tol: float) -> bool:
    if len(a) != len(b):
        return False
    sa = sorted(a, key=lambda t: t.power)
    sb = sorted(b, key=lambda t: t.power)
    for x, y in zip(sa, sb):
        if abs(x.power - y.power) > 1e-12 * max(1.0, abs(x.power)):
            return False
        if abs(x.coeff - y.coeff) > tol * max(1.0, abs(x.coeff), abs(y.coeff)):
            return False
    return True


def is_dual_pair(
    p: PotentialSpec, state_p: RadialState, q: PotentialSpec, state_q: RadialState, tol: float = PAIR_TOL
) -> bool:
    """Whether some pivot of p maps (p, state_p) onto (q, state_q) up to term order"""
    for pivot, term in enumerate(p.terms):
        if abs(term.power + 2) < POLE_TOL:
            continue
        v, sv, _ = polynomial_dual(p, pivot, state_p, m_dims=state_q.dimension)
        if not _same_terms(v.terms, q.terms, tol):
            continue
        scale = max(1.0, abs(sv.E), abs(state_q.E))
        if abs(sv.E - state_q.E) <= tol * scale and abs(sv.l - state_q.l) <= tol * max(1.0, abs(sv.l)):
            return True
    return False


def dual_set_members(u: PotentialSpec, state: Optional[RadialState] = None) -> List[DualSetMember]:
    """u and its N pivot images, each with its state and map, checked pairwise"""
    _require_polynomial(u)
    state = state or RadialState(dimension=u.dimension, l=0.0, E=1.0)
    members = [DualSetMember(potential=u, state=state)]
    for pivot in range(len(u.terms)):
        v, sv, m = polynomial_dual(u, pivot, state)
        relations = {
            "coord_exponent": m.coord_exponent,
            "energy_coupling_factor": m.energy_coupling_factor,
            "pivot_coupling": u.terms[pivot].coeff.real,
            "dual_energy": sv.E,
            "pivot_image_coupling": v.terms[pivot].coeff.real,
            "energy": state.E,
            "angular_scale": m.angular_scale,
        }
        members.append(DualSetMember(potential=v, state=sv, pivot_index=pivot, duality_map=m, relations=relations))

    for i, a in enumerate(members):
        for j, b in enumerate(members):
            if i != j and not is_dual_pair(a.potential, a.state, b.potential, b.state):
                raise VerificationFailure(f"Dual set members {i} and {j} are not related by a pivot map")
    return members


def dual_set(u: PotentialSpec, state: Optional[RadialState] = None) -> List[PotentialSpec]:
    """The N+1 pairwise dual potentials generated by u.

    Pivot-image couplings depend on the reference energy of the state (default E=1).
    """
    return [m.potential for m in dual_set_members(u, state)]


def _solve_angular(target: float) -> float:
    """l >= -1/2 with l(l+1) = target"""
    disc = 0.25 + target
    if disc < -1e-14:
        raise UnsolvableAngular(f"l(l+1) = {target} has no real solution l >= -1/2")
    return -0.5 + math.sqrt(max(disc, 0.0))


def exp_log_dual(
    potential: PotentialSpec, state: RadialState, alpha_scale: float = 1.0, sigma: float = 2.0
) -> Tuple[PotentialSpec, RadialState, ExpLogMap]:
    """xi e^(sigma r) <-> eta / (rho ln(alpha rho))^2.

    Exponential input uses alpha_scale for the image; LogSquared input uses sigma.
    Angular momentum and coupling swap roles: eta = l(l+1) and l_dual(l_dual+1) is set
    by the energy.
    """
    if potential.kind == "exponential":
        s = potential.sigma
        if state.E > 0:
            raise UnsolvableAngular(f"Exponential image needs E <= 0, got {state.E}")
        eta = state.l * (state.l + 1)
        dual_l = _solve_angular(-((2 / s) ** 2) * state.E - 0.25)
        dual_energy = -((2 / s) ** 2) * alpha_scale**2 * potential.xi
        v = PotentialSpec.log_squared(eta=eta, alpha_scale=alpha_scale)
        m = ExpLogMap(direction="exp_to_log", sigma=s, alpha_scale=alpha_scale)
    elif potential.kind == "logsquared":
        a = potential.alpha_scale
        xi = -((sigma / 2) ** 2) * state.E / a**2
        dual_energy = -((sigma / 2) ** 2) * (state.l * (state.l + 1) + 0.25)
        dual_l = _solve_angular(potential.eta)
        v = PotentialSpec.exponential(xi=xi, sigma=sigma)
        m = ExpLogMap(direction="log_to_exp", sigma=sigma, alpha_scale=a)
    else:
        raise PreconditionViolated("exp_log_dual takes an Exponential or LogSquared potential")
    dual_state = RadialState(dimension=3, l=dual_l, n_r=state.n_r, E=dual_energy, is_dual_image=True)
    return v, dual_state, m


def map_coordinate(m: AnyMap, r):
    """Apply the coordinate part of a duality map"""
    r = np.asarray(r, dtype=float)
    if isinstance(m, ExpLogMap):
        if m.direction == "exp_to_log":
            return np.exp(m.sigma * r / 2) / m.alpha_scale
        return (2 / m.sigma) * np.log(m.alpha_scale * r)
    return r**m.coord_exponent


def _amplitude_factor(m: AnyMap, r: np.ndarray) -> np.ndarray:
    if isinstance(m, ExpLogMap):
        if m.direction == "exp_to_log":
            return np.exp(m.sigma * r / 4)
        return 1 / np.sqrt(r)
    if isinstance(m, ClassicalMap):
        m = m.duality
    return r ** (m.pivot_power / 4)


def normalise_amplitude(values: np.ndarray) -> np.ndarray:
    """Scale so the sample of largest magnitude equals +1"""
    values = np.asarray(values)
    peak = values[np.argmax(np.abs(values))]
    if peak == 0:
        return values
    return values / peak


def map_wavefunction(m: AnyMap, samples: Sequence[Tuple[float, float]]) -> List[Tuple[float, float]]:
    """Map (r, u) samples to (rho, v), dropping constants and normalising to unit max amplitude"""
    if not samples:
        return []
    r = np.array([s[0] for s in samples], dtype=float)
    u = np.array([s[1] for s in samples], dtype=float)
    if np.any(r <= 0) or np.any(np.diff(r) < 0):
        raise PreconditionViolated("Wavefunction samples need r > 0 sorted ascending")
    rho = map_coordinate(m, r)
    v = normalise_amplitude(_amplitude_factor(m, r) * u)
    return list(zip(rho.tolist(), v.tolist()))


def _monotone(values: Sequence[float]) -> bool:
    diffs = np.diff(values)
    return bool(np.all(diffs > 0) or np.all(diffs < 0))


def dual_eigenvalue(
    solver_for_U: EnergySolver,
    m: DualityMap,
    target_state: RadialState,
    couplings_V: PotentialSpec,
) -> float:
    """Energy of a state of V obtained by inverting the spectrum function of U.

    couplings_V is V with its pivot-image term at m.pivot_index; the pivot coupling of U
    is solved so that U's level at the mapped quantum numbers equals -eta f, and the
    dual energy is -xi / f.
    """
    f = m.energy_coupling_factor
    s = m.coord_exponent
    n, dim_v = m.dims
    terms = couplings_V.terms
    eta = terms[m.pivot_index].coeff.real
    target_energy = -eta * f
    l_u = s * effective_angular(target_state.l, dim_v) - n / 2 + 1
    couplings = [t.coeff.real * f for t in terms]
    sign = 1.0 if m.pivot_power > 0 else -1.0

    def mismatch(xi: float) -> float:
        trial = list(couplings)
        trial[m.pivot_index] = xi
        return solver_for_U(target_state.n_r, l_u, trial) - target_energy

    magnitudes = [2.0**k for k in range(-20, 21)]
    previous_xi, previous_val = None, None
    bracket = None
    for mag in magnitudes:
        xi = sign * mag
        try:
            val = mismatch(xi)
        except NewtonDualError as e:
            logger.debug(f"Solver failed at coupling {xi:g}: {str(e)}")
            previous_xi, previous_val = None, None
            continue
        if previous_val is not None and np.sign(val) != np.sign(previous_val):
            bracket = (previous_xi, xi)
            break
        if val == 0:
            return -xi / f
        previous_xi, previous_val = xi, val
    if bracket is None:
        raise NoBracket(f"No coupling in +/-[1e-6, 1e6] gives U energy {target_energy:.6g}")

    lo, hi = sorted(bracket)
    trial_xi = np.linspace(lo, hi, 5)
    samples = [mismatch(x) for x in trial_xi]
    if not _monotone(samples):
        raise NonMonotone(f"U energy is not monotone in its coupling on [{lo:g}, {hi:g}]")
    xi = brentq(mismatch, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    logger.debug(f"Dual eigenvalue: U coupling {xi:.15g} reproduces E_U={target_energy:.15g}")
    return -xi / f
