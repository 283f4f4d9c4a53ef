"""Radial problems in biconfluent Heun form.

With z = c r^p the radial equation u'' + [E - L(L+1)/r^2 - U(r)] u = 0 becomes

    W'' + [P4 z^2 + P3 z + P2 + P1/z - ((alpha^2 - 1)/4)/z^2] W = 0,   u = r^((1-p)/2) W,

where a potential power e lands in slot k = (e+2)/p, the energy in slot 2/p and
P_k = X_k / (p^2 c^k). c is fixed by P4 = -1, and then

    alpha = (2L+1)/p, beta = -P3, gamma = P2 + beta^2/4, delta = -2 P1,
    u = z^((L+1)/p) exp(-z^2/2 - beta z/2) N(alpha, beta, gamma, delta, z).

Bound states are the zeros of K2 along real E.
"""

import asyncio
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from loguru import logger
from scipy.optimize import brentq, minimize_scalar

from newton_dual.exceptions import (
    NewtonDualError,
    NoneFound,
    NotHeunReducible,
    NumericalError,
    PreconditionViolated,
    ReductionFailed,
    UnsupportedFamily,
)
from newton_dual.schemas.schemas import (
    BoundState,
    EnergyRole,
    HeunParams,
    HeunReduction,
    Peel,
    PotentialSpec,
    QuadratureControl,
    SeriesControl,
    SpectrumRequest,
)
from newton_dual.services.connection import select_connection
from newton_dual.services.heunfn import heun_regular_array, heun_regular_line

SUBSTITUTION_EXPONENTS = (1.0, 0.5, 2.0, 2.0 / 3.0)
SLOT_TOL = 1e-9
ZERO_REL_TOL = 1e-10
EDGE_FRACTION = 1e-6
NODE_COUNT_Z_MAX = 4.0

_ROLE_BY_SLOT = {
    4: EnergyRole.AS_Z2_COEFFICIENT,
    3: EnergyRole.AS_BETA,
    2: EnergyRole.AS_GAMMA,
    1: EnergyRole.AS_DELTA,
}


def _fourth_root(w: complex) -> complex:
    """Fourth root with argument in [-pi/4, pi/4); a negative real gives arg -pi/4"""
    w = complex(w)
    phase = math.atan2(-w.imag, w.real)
    if phase == -math.pi:
        phase = math.pi
    return abs(w) ** 0.25 * complex(math.cos(-phase / 4), math.sin(-phase / 4))


def _slot(power: float, p: float) -> Optional[int]:
    k = (power + 2) / p
    nearest = round(k)
    if abs(k - nearest) > SLOT_TOL or not 1 <= nearest <= 4:
        return None
    return int(nearest)


def _absorb_constant_and_centrifugal(u: PotentialSpec, l: float, E: float):
    L = l + (u.dimension - 3) / 2
    energy = E
    centrifugal = L * (L + 1)
    remaining = []
    for t in u.terms:
        if abs(t.power) < SLOT_TOL or abs(t.power + 2) < SLOT_TOL:
            if t.coeff.imag != 0:
                raise NotHeunReducible(f"Complex coefficient {t.coeff} on r^{t.power:g} cannot be absorbed")
            if abs(t.power) < SLOT_TOL:
                energy -= t.coeff.real
            else:
                centrifugal += t.coeff.real
        else:
            remaining.append(t)
    disc = 0.25 + centrifugal
    if disc < 0:
        raise NotHeunReducible(f"Inverse-square strength {centrifugal:.6g} is below -1/4 (fall to centre)")
    return -0.5 + math.sqrt(disc), energy, remaining


def reduce_to_heun(u: PotentialSpec, l: float, E: float) -> HeunReduction:
    """Find z = c r^p that maps the radial equation of u at energy E onto the Heun form.

    Substitution exponents are tried in the order 1, 1/2, 2, 2/3. A constant term shifts
    E and an inverse-square term is folded into the effective angular momentum.
    """
    if u.kind != "polynomial":
        raise NotHeunReducible(f"Only polynomial potentials reduce to Heun form, got {u.kind}")
    L, energy, terms = _absorb_constant_and_centrifugal(u, l, E)

    for p in SUBSTITUTION_EXPONENTS:
        energy_slot = _slot(0.0, p)
        slots = [_slot(t.power, p) for t in terms]
        if any(k is None for k in slots) or energy_slot in slots:
            continue
        x: Dict[int, complex] = {energy_slot: complex(energy)}
        for k, t in zip(slots, terms):
            x[k] = -t.coeff
        if 4 not in x:
            continue
        if x[4] == 0:
            raise ReductionFailed(f"Leading coefficient vanishes at E={E}; z = c r^{p:g} degenerates")

        c = _fourth_root(-x[4] / p**2)
        scaled = {k: x.get(k, 0j) / (p**2 * c**k) for k in (1, 2, 3)}
        beta = -scaled[3]
        heun = HeunParams(
            alpha=(2 * L + 1) / p,
            beta=beta,
            gamma=scaled[2] + beta * beta / 4,
            delta=-2 * scaled[1],
        )
        return HeunReduction(
            p=p,
            c=c,
            peel=Peel(gauss_coeff=0.5, linear_coeff=beta / 2, power_s=(L + 1) / p),
            heun=heun,
            energy_role=_ROLE_BY_SLOT[energy_slot],
            effective_l=L,
            energy=energy,
        )

    raise NotHeunReducible(
        f"No substitution z = c r^p with p in (1, 1/2, 2, 2/3) fits the powers {[t.power for t in terms]}"
    )


def reconstruct_radial_equation(red: HeunReduction) -> Tuple[PotentialSpec, complex, float]:
    """Invert a reduction: the potential terms, energy and L it encodes"""
    p, c, h = red.p, red.c, red.heun
    scaled = {
        4: -1.0,
        3: -h.beta,
        2: h.gamma - h.beta * h.beta / 4,
        1: -h.delta / 2,
    }
    x = {k: v * p**2 * c**k for k, v in scaled.items()}
    energy_slot = _slot(0.0, p)
    energy = x.pop(energy_slot)
    scale = max(abs(v) for v in x.values())
    terms = [(-v, k * p - 2) for k, v in sorted(x.items()) if abs(v) > 1e-14 * scale]
    L = (complex(h.alpha).real * p - 1) / 2
    return PotentialSpec.polynomial(terms), energy, L


def connection_value(
    u: PotentialSpec,
    l: float,
    E: float,
    q: QuadratureControl = QuadratureControl(),
    ctl: SeriesControl = SeriesControl(),
) -> complex:
    """K2 of the Heun reduction at energy E"""
    red = reduce_to_heun(u, l, E)
    return select_connection(red.heun, q, ctl).connection_coefficient(red.heun)


def _safe_connection_value(u, l, E, q, ctl) -> complex:
    try:
        return connection_value(u, l, E, q, ctl)
    except NewtonDualError as e:
        logger.debug(f"K2 unavailable at E={E:.12g}: {str(e)}")
        return complex(np.nan, np.nan)


def _scan_energies(req: SpectrumRequest) -> np.ndarray:
    lo, hi = req.energy_window
    return np.linspace(lo, hi, req.scan_points)


def _refine_real(f, a: float, b: float, fa: float, fb: float) -> Optional[float]:
    root = brentq(f, a, b, xtol=1e-15, rtol=ZERO_REL_TOL * 1e-2, maxiter=200)
    # A sign change through a pole leaves |K2| large at the "root".
    if abs(f(root)) > max(abs(fa), abs(fb)):
        logger.debug(f"Rejected sign change on [{a:.6g}, {b:.6g}]: pole, not zero")
        return None
    return float(root)


def _refine_complex(g, a: float, b: float, scale: float) -> Optional[float]:
    res = minimize_scalar(lambda e: abs(g(e)), bounds=(a, b), method="bounded", options={"xatol": 1e-14})
    value = g(res.x)
    if abs(value) <= 1e-8 * scale:
        return float(res.x)
    logger.debug(f"Local |K2| minimum {abs(value):.3e} at E={res.x:.10g} is not a zero")
    return None


def _zeros_from_scan(
    energies: np.ndarray, values: np.ndarray, evaluate, window: Tuple[float, float]
) -> List[float]:
    finite = np.isfinite(values)
    if not np.any(finite):
        raise ReductionFailed(f"K2 could not be evaluated anywhere in {window}")
    scale = float(np.max(np.abs(values[finite])))
    real_mode = float(np.max(np.abs(values[finite].imag))) <= 1e-8 * scale
    zeros = []

    if real_mode:

        def f(e: float) -> float:
            return evaluate(e).real

        for i in range(len(energies) - 1):
            va, vb = values[i], values[i + 1]
            if not (np.isfinite(va) and np.isfinite(vb)):
                continue
            if va.real == 0:
                zeros.append(float(energies[i]))
                continue
            if np.sign(va.real) != np.sign(vb.real) and vb.real != 0:
                root = _refine_real(f, energies[i], energies[i + 1], va.real, vb.real)
                if root is not None:
                    zeros.append(root)
        if values[-1].real == 0:
            zeros.append(float(energies[-1]))
    else:
        mags = np.where(finite, np.abs(values), np.inf)
        for i in range(1, len(energies) - 1):
            if mags[i] <= mags[i - 1] and mags[i] <= mags[i + 1]:
                root = _refine_complex(evaluate, energies[i - 1], energies[i + 1], scale)
                if root is not None:
                    zeros.append(root)
    return sorted(set(zeros))


def count_nodes(values: Sequence[float]) -> int:
    """Sign changes of a sampled function, ignoring exact zeros"""
    signs = np.sign([v for v in values if v != 0])
    return int(np.count_nonzero(np.diff(signs)))


def _node_count(u: PotentialSpec, l: float, E: float) -> Optional[int]:
    try:
        red = reduce_to_heun(u, l, E)
        if abs(red.c.imag) > 1e-12 or not red.heun.is_real:
            return None
        r_max = (NODE_COUNT_Z_MAX / red.c.real) ** (1 / red.p)
        grid = np.linspace(r_max / 400, r_max, 400)
        samples = eigenfunction(u, l, E, grid)
        return count_nodes([v for _, v in samples])
    except NumericalError as e:
        logger.debug(f"Node count unavailable at E={E:.10g}: {str(e)}")
        return None


def _assemble_states(
    req: SpectrumRequest, zeros: List[float], evaluate, scale: float
) -> List[BoundState]:
    if not zeros:
        raise NoneFound(f"No K2 zero for {req.potential.describe()} (l={req.l}) in {req.energy_window}")
    lo, hi = req.energy_window
    edge = EDGE_FRACTION * (hi - lo)
    states = []
    for n_r, E in enumerate(zeros[: req.max_states]):
        at_edge = abs(E - lo) <= edge or abs(E - hi) <= edge
        if at_edge:
            logger.warning(f"Eigenvalue {E:.12g} sits at the edge of the window {req.energy_window}")
        nodes = _node_count(req.potential, req.l, E)
        if nodes is not None and nodes != n_r:
            logger.warning(f"State {n_r} at E={E:.12g} has {nodes} nodes; window may miss lower states")
        residual = abs(evaluate(E)) / scale if scale > 0 else 0.0
        states.append(BoundState(E=E, n_r=n_r, k2_residual=residual, nodes=nodes, at_window_edge=at_edge))
    return states


def bound_spectrum(
    req: SpectrumRequest,
    q: QuadratureControl = QuadratureControl(),
    ctl: SeriesControl = SeriesControl(),
) -> List[BoundState]:
    """Eigenvalues in the request window, as zeros of K2 along real E"""
    if req.potential.kind == "logsquared":
        raise UnsupportedFamily("LogSquared spectra are oracle-only (singular at r = 1/alpha)")

    def evaluate(E: float) -> complex:
        return connection_value(req.potential, req.l, E, q, ctl)

    energies = _scan_energies(req)
    values = np.array([_safe_connection_value(req.potential, req.l, E, q, ctl) for E in energies])
    zeros = _zeros_from_scan(energies, values, evaluate, req.energy_window)
    scale = float(np.nanmax(np.abs(values)))
    return _assemble_states(req, zeros, evaluate, scale)


async def bound_spectrum_async(
    req: SpectrumRequest,
    q: QuadratureControl = QuadratureControl(),
    ctl: SeriesControl = SeriesControl(),
) -> List[BoundState]:
    """bound_spectrum with the scan points evaluated concurrently"""
    if req.potential.kind == "logsquared":
        raise UnsupportedFamily("LogSquared spectra are oracle-only (singular at r = 1/alpha)")

    def evaluate(E: float) -> complex:
        return connection_value(req.potential, req.l, E, q, ctl)

    energies = _scan_energies(req)
    tasks = [asyncio.to_thread(_safe_connection_value, req.potential, req.l, float(E), q, ctl) for E in energies]
    values = np.array(await asyncio.gather(*tasks))
    zeros = await asyncio.to_thread(_zeros_from_scan, energies, values, evaluate, req.energy_window)
    scale = float(np.nanmax(np.abs(values)))
    return await asyncio.to_thread(_assemble_states, req, zeros, evaluate, scale)


def eigenvalue_near(
    u: PotentialSpec,
    l: float,
    E_guess: float,
    rel_step: float = 0.02,
    q: QuadratureControl = QuadratureControl(),
    ctl: SeriesControl = SeriesControl(),
) -> float:
    """Bracket and refine the K2 zero closest to E_guess, for real-parameter families"""

    def f(E: float) -> float:
        return connection_value(u, l, E, q, ctl).real

    step = rel_step * max(abs(E_guess), 1e-3)
    f0 = f(E_guess)
    if f0 == 0:
        return E_guess
    for _ in range(30):
        for side in (-1, 1):
            e = E_guess + side * step
            fe = f(e)
            if np.sign(fe) != np.sign(f0):
                a, b = sorted((E_guess, e))
                fa, fb = (f0, fe) if a == E_guess else (fe, f0)
                root = _refine_real(f, a, b, fa, fb)
                if root is not None:
                    return root
        step *= 1.6
    raise NoneFound(f"No K2 zero near E={E_guess:.10g} for {u.describe()}")


def eigenfunction(
    u: PotentialSpec,
    l: float,
    E: float,
    grid: Sequence[float],
    ctl: SeriesControl = SeriesControl(),
) -> List[Tuple[float, float]]:
    """Regular solution on a radial grid, normalised to unit max amplitude"""
    r = np.asarray(grid, dtype=float)
    if np.any(r < 0):
        raise PreconditionViolated("Radial grid must be non-negative")
    try:
        red = reduce_to_heun(u, l, E)
    except NotHeunReducible:
        raise
    except NewtonDualError as e:
        raise ReductionFailed(f"Error reducing {u.describe()} at E={E}: {str(e)}") from e
    z = red.c * r.astype(complex) ** red.p
    peel = red.peel
    prefactor = np.where(
        r > 0, z**peel.power_s * np.exp(-peel.gauss_coeff * z * z - peel.linear_coeff * z), 0
    )
    if np.all(z.imag == 0) and np.all(z.real >= 0):
        regular = heun_regular_line(red.heun, z.real, ctl)
    else:
        regular = heun_regular_array(red.heun, z, ctl)
    values = prefactor * regular
    peak = values[np.argmax(np.abs(values))]
    if peak != 0:
        values = values / peak
    return list(zip(r.tolist(), values.real.tolist()))


def phase_shift(
    u: PotentialSpec,
    l: int,
    k: float,
    q: QuadratureControl = QuadratureControl(),
    ctl: SeriesControl = SeriesControl(),
) -> float:
    """delta_l = -arg K2 at E = k^2, in (-pi, pi]"""
    if k <= 0:
        raise PreconditionViolated(f"Wave number must be positive, got {k}")
    red = reduce_to_heun(u, l, k * k)
    if red.p != 0.5 or red.energy_role != EnergyRole.AS_Z2_COEFFICIENT:
        raise UnsupportedFamily(f"Phase shifts need a z = c sqrt(r) reduction, got p={red.p:g}")
    if abs(red.heun.beta) > 1e-14:
        raise UnsupportedFamily("Potentials with a 1/sqrt(r) tail (beta != 0) have no plane-wave phase")
    value = select_connection(red.heun, q, ctl).connection_coefficient(red.heun)
    if value == 0:
        raise NumericalError(f"K2 vanishes at k={k}; phase undefined")
    delta = -float(np.angle(value))
    if delta <= -math.pi:
        delta += 2 * math.pi
    logger.debug(f"Phase shift l={l}, k={k:.6g}: K2={value:.10g}, delta={delta:.12g}")
    return delta


def ho_energy(xi: float, n_r: int, l: float, n_dims: int = 3) -> float:
    """2 sqrt(xi) (2 n_r + l + n/2)"""
    if xi <= 0:
        raise PreconditionViolated(f"Harmonic coupling must be positive, got {xi}")
    return 2 * math.sqrt(xi) * (2 * n_r + l + n_dims / 2)


def coulomb_energy_readings(eta: float, n_r: int, l: float, m_dims: int = 3) -> Dict[str, float]:
    """Both readings of the m-dimensional Coulomb level: squared and unsquared denominator"""
    if eta >= 0:
        raise PreconditionViolated(f"Coulomb coupling must be negative, got {eta}")
    base = n_r + l + (m_dims - 1) / 2
    return {
        "squared": -(eta**2 / 4) / base**2,
        "unsquared": -(eta**2 / 4) / base,
    }


def coulomb_energy(eta: float, n_r: int, l: float, m_dims: int = 3) -> float:
    """-(eta^2/4) / (n_r + l + (m-1)/2)^2"""
    return coulomb_energy_readings(eta, n_r, l, m_dims)["squared"]
