"""Ground truth that does not go through Heun functions.

fd_bound_spectrum discretises the radial equation for phi = u / r^(L+1),

    -r^-(d-1) (r^(d-1) phi')' + U phi = E phi,   d = 2L + 3,

with a finite-volume three-point rule: exact cell volumes, flux r^(d-1)/h through the
faces, zero flux at r = 0 and phi = 0 at r_max. The symmetrised tridiagonal matrix is
solved by Sturm bisection and the result Richardson-extrapolated over h and h/2.
"""

import asyncio
import math
from typing import List, Optional, Tuple

import mpmath
import numpy as np
from loguru import logger
from scipy.integrate import cumulative_trapezoid, quad, solve_ivp
from scipy.linalg import eigvalsh_tridiagonal
from scipy.optimize import brentq

from newton_dual.exceptions import (
    GridTooCoarse,
    MatchUnstable,
    NoAllowedRegion,
    PreconditionViolated,
    TurningPointNotBracketed,
    UnsupportedFamily,
)
from newton_dual.schemas.schemas import (
    ClassicalMap,
    DualityMap,
    FDEigenvalue,
    OrbitSample,
    PotentialSpec,
    RadialGrid,
    phase_distance,
)
from newton_dual.services.duality import classical_dual

GRID_TOLERANCE = 1e-2
MATCH_TOLERANCE = 5e-2
DECAY_EXPONENT = 18.0
END_EXCLUSION = 0.05

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)


def _require_real(u: PotentialSpec) -> None:
    if u.kind == "polynomial" and not u.is_real:
        raise PreconditionViolated("The finite-difference oracle needs real couplings")


def _cell_potential_moments(u: PotentialSpec, a: np.ndarray, b: np.ndarray, d: float) -> np.ndarray:
    """int_a^b U(r) r^(d-1) dr per cell"""
    if u.kind == "polynomial":
        total = np.zeros_like(a)
        for t in u.terms:
            k = d + t.power
            if k <= 0:
                raise PreconditionViolated(f"r^{t.power:g} is not integrable against r^{d - 1:g} at the origin")
            total += t.coeff.real * (b**k - a**k) / k
        return total
    half = (b - a) / 2
    mid = (b + a) / 2
    total = np.zeros_like(a)
    for x, w in zip(_GAUSS_X, _GAUSS_W):
        r = mid + half * x
        total += w * half * u.evaluate(r) * r ** (d - 1)
    return total


def _regular_operator(u: PotentialSpec, L: float, r_max: float, n_points: int) -> Tuple[np.ndarray, np.ndarray]:
    h = r_max / n_points
    nodes = h * np.arange(n_points)
    d = 2 * L + 3
    faces = np.concatenate(([0.0], nodes + h / 2))
    faces[-1] = min(faces[-1], r_max)
    a, b = faces[:-1], faces[1:]
    volume = (b**d - a**d) / d
    flux = b[:-1] ** (d - 1) / h
    moments = _cell_potential_moments(u, a, b, d)
    # Last interior node couples to phi(r_max) = 0 through its outer face.
    outer = b[-1] ** (d - 1) / (r_max - nodes[-1])
    left = np.concatenate(([0.0], flux))
    right = np.concatenate((flux, [outer]))
    diag = (left + right + moments) / volume
    off = -flux / np.sqrt(volume[:-1] * volume[1:])
    return diag, off


def _dirichlet_operator(u: PotentialSpec, L: float, grid: RadialGrid, n_points: int) -> Tuple[np.ndarray, np.ndarray]:
    r = np.linspace(grid.r_min, grid.r_max, n_points)[1:-1]
    h = (grid.r_max - grid.r_min) / (n_points - 1)
    diag = 2 / h**2 + L * (L + 1) / r**2 + u.evaluate(r)
    off = np.full(r.size - 1, -1 / h**2)
    return diag, off


def _operator(u: PotentialSpec, L: float, grid: RadialGrid, n_points: int):
    if u.kind == "logsquared":
        if grid.r_min <= 1 / u.alpha_scale:
            raise PreconditionViolated(f"LogSquared grids must start beyond r = 1/alpha = {1 / u.alpha_scale:.6g}")
        return _dirichlet_operator(u, L, grid, n_points)
    return _regular_operator(u, L, grid.r_max, n_points)


def _lowest(diag: np.ndarray, off: np.ndarray, lo: int, hi: int) -> np.ndarray:
    return eigvalsh_tridiagonal(diag, off, select="i", select_range=(lo, hi), lapack_driver="stebz")


def _extrapolate(coarse: np.ndarray, fine: np.ndarray) -> List[FDEigenvalue]:
    result = []
    for n, (e_h, e_h2) in enumerate(zip(coarse, fine)):
        spread = abs(e_h - e_h2)
        if spread > GRID_TOLERANCE * max(abs(e_h2), 1e-12):
            raise GridTooCoarse(f"Level {n}: E(h)={e_h:.8g} and E(h/2)={e_h2:.8g} differ by more than 1%")
        result.append(FDEigenvalue(E=float((4 * e_h2 - e_h) / 3), error_estimate=float(spread / 3)))
    return result


def fd_bound_spectrum(u: PotentialSpec, l: float, grid: RadialGrid, count: int) -> List[FDEigenvalue]:
    """Lowest `count` levels of u with angular momentum l"""
    if count < 1:
        raise PreconditionViolated(f"count must be positive, got {count}")
    _require_real(u)
    L = l + (u.dimension - 3) / 2
    levels = []
    for n_points in (grid.n_points, 2 * grid.n_points):
        diag, off = _operator(u, L, grid, n_points)
        levels.append(_lowest(diag, off, 0, count - 1))
    result = _extrapolate(levels[0], levels[1])
    logger.debug(f"FD levels of {u.describe()} (l={l}): {[round(e.E, 10) for e in result]}")
    return result


async def fd_bound_spectrum_async(u: PotentialSpec, l: float, grid: RadialGrid, count: int) -> List[FDEigenvalue]:
    """fd_bound_spectrum with one bisection per eigen-index, run concurrently"""
    if count < 1:
        raise PreconditionViolated(f"count must be positive, got {count}")
    _require_real(u)
    L = l + (u.dimension - 3) / 2
    levels = []
    for n_points in (grid.n_points, 2 * grid.n_points):
        diag, off = await asyncio.to_thread(_operator, u, L, grid, n_points)
        tasks = [asyncio.to_thread(_lowest, diag, off, i, i) for i in range(count)]
        levels.append(np.concatenate(await asyncio.gather(*tasks)))
    return _extrapolate(levels[0], levels[1])


def _effective_gap(u: PotentialSpec, L: float, E: float):
    def gap(r):
        r = np.asarray(r, dtype=float)
        return np.real(u.evaluate(r)) + L * (L + 1) / r**2 - E

    return gap


def auto_grid(u: PotentialSpec, l: float, E_estimate: float, n_points: int = 4000) -> RadialGrid:
    """Radial box wide enough for a level near E_estimate.

    r_max is where the WKB decay exponent beyond the outer turning point reaches 18, and
    at least 1.5 times that turning point.
    """
    L = l + (u.dimension - 3) / 2
    gap = _effective_gap(u, L, E_estimate)
    r = np.logspace(-3, 4, 4000)
    g = gap(r)
    allowed = np.nonzero(g < 0)[0]
    if allowed.size == 0:
        raise NoAllowedRegion(f"E={E_estimate} lies below {u.describe()} everywhere")
    last = allowed[-1]
    if last == r.size - 1:
        raise NoAllowedRegion(f"E={E_estimate} is not bound for {u.describe()} within r < 1e4")
    r_turn = brentq(gap, r[last], r[last + 1])
    outside = r[last + 1 :]
    exponent = cumulative_trapezoid(np.sqrt(np.maximum(gap(outside), 0)), outside, initial=0)
    reached = np.nonzero(exponent >= DECAY_EXPONENT)[0]
    r_decay = outside[reached[0]] if reached.size else outside[-1]
    r_max = max(1.5 * r_turn, r_decay)
    return RadialGrid(r_min=1e-4 * r_max, r_max=r_max, n_points=n_points)


def _split_scattering_terms(u: PotentialSpec) -> Tuple[float, List[Tuple[float, float]]]:
    if u.kind != "polynomial":
        raise UnsupportedFamily("Phase shifts are defined for power-law potentials only")
    _require_real(u)
    coulomb = 0.0
    short = []
    for t in u.terms:
        if t.coeff == 0:
            continue
        if abs(t.power + 1) < 1e-12:
            coulomb = t.coeff.real
        elif -2 < t.power < -1:
            short.append((t.coeff.real, t.power))
        else:
            raise UnsupportedFamily(
                f"r^{t.power:g} is neither Coulomb nor short-range; no sinusoid template matches it"
            )
    return coulomb, short


def _coulomb_pair(l: int, eta: float, rho: float) -> Tuple[float, float, float, float]:
    """F_l, dF_l/drho, G_l, dG_l/drho"""
    f0 = float(mpmath.coulombf(l, eta, rho))
    g0 = float(mpmath.coulombg(l, eta, rho))
    f1 = float(mpmath.coulombf(l + 1, eta, rho))
    g1 = float(mpmath.coulombg(l + 1, eta, rho))
    a = (l + 1) ** 2 / rho + eta
    b = math.sqrt((l + 1) ** 2 + eta**2)
    return f0, (a * f0 - b * f1) / (l + 1), g0, (a * g0 - b * g1) / (l + 1)


def _phase_at(l: int, k: float, eta: float, radius: float, u: float, du: float) -> float:
    f, fp, g, gp = _coulomb_pair(l, eta, k * radius)
    det = k * (f * gp - g * fp)
    a = (u * k * gp - du * g) / det
    b = (du * f - u * k * fp) / det
    return math.atan2(b, a)


def _wrap_half_pi(delta: float) -> float:
    wrapped = math.remainder(delta, math.pi)
    return wrapped if wrapped > -math.pi / 2 else wrapped + math.pi


def fd_phase_shift(u: PotentialSpec, l: int, k: float, grid: RadialGrid = RadialGrid()) -> float:
    """Scattering phase by outward integration and matching to Coulomb functions.

    The result includes the Coulomb phase arg Gamma(l+1+i eta) and a first-order WKB
    correction for the short-range terms beyond the matching radius, reduced modulo pi
    to (-pi/2, pi/2].
    """
    if k <= 0:
        raise PreconditionViolated(f"Wave number must be positive, got {k}")
    coulomb, short = _split_scattering_terms(u)
    eta = coulomb / (2 * k)
    r0 = grid.r_min

    def rhs(r, y):
        return [y[1], (l * (l + 1) / r**2 + np.real(u.evaluate(r)) - k * k) * y[0]]

    # Regular start u = r^(l+1) (1 + sum a_j r^(p_j+2)).
    start_terms = [(c / ((p + 2) * (2 * l + p + 3)), p) for c, p in ((t.coeff.real, t.power) for t in u.terms)]
    value = 1 + sum(a * r0 ** (p + 2) for a, p in start_terms)
    slope = sum(a * (p + 2) * r0 ** (p + 1) for a, p in start_terms)
    log_derivative = (l + 1) / r0 + slope / value

    r1, r2 = 0.7 * grid.r_max, grid.r_max
    sol = solve_ivp(
        rhs, (r0, r2), [1.0, log_derivative], method="DOP853", rtol=1e-10, atol=1e-14, t_eval=[r1, r2]
    )
    if not sol.success:
        raise MatchUnstable(f"Outward integration failed: {sol.message}")

    sigma = float(mpmath.arg(mpmath.gamma(l + 1 + 1j * eta)))
    phases = []
    for i, radius in enumerate((r1, r2)):
        base = _phase_at(l, k, eta, radius, sol.y[0][i], sol.y[1][i])
        tail = sum(c * radius ** (p + 1) / ((p + 1) * 2 * k) for c, p in short)
        phases.append(base + tail + sigma)
    spread = phase_distance(*phases)
    if spread > MATCH_TOLERANCE:
        raise MatchUnstable(f"Phases at r={r1:.4g} and r={r2:.4g} differ by {spread:.3e}")
    delta = _wrap_half_pi(phases[1])
    logger.debug(f"FD phase l={l}, k={k:.6g}: {delta:.10g} (two-radius spread {spread:.2e})")
    return delta


def _radicand(u: PotentialSpec, E: float, L: float):
    def radicand(r):
        r = np.asarray(r, dtype=float)
        return 2 * (E - L * L / (2 * r * r) - np.real(u.evaluate(r)))

    return radicand


def _force_derivatives(u: PotentialSpec, r: float) -> Tuple[float, float]:
    if u.kind == "polynomial":
        d1 = sum(t.coeff.real * t.power * r ** (t.power - 1) for t in u.terms)
        d2 = sum(t.coeff.real * t.power * (t.power - 1) * r ** (t.power - 2) for t in u.terms)
        return d1, d2
    h = 1e-4 * r
    f = lambda x: float(np.real(u.evaluate(x)))  # noqa: E731
    return (f(r + h) - f(r - h)) / (2 * h), (f(r + h) - 2 * f(r) + f(r - h)) / h**2


def _turning_point(radicand, r_start: float, factor: float) -> float:
    inner = r_start
    for _ in range(80):
        outer = inner * factor
        if radicand(outer) < 0:
            return brentq(radicand, min(inner, outer), max(inner, outer), xtol=1e-15, rtol=1e-15)
        inner = outer
    raise TurningPointNotBracketed(f"No turning point found from r={r_start:g} with factor {factor:g}")


def find_allowed_radius(u: PotentialSpec, E: float, L: float) -> float:
    """A radius where the radial kinetic energy is largest"""
    radicand = _radicand(u, E, L)
    r = np.logspace(-6, 6, 6000)
    values = radicand(r)
    best = int(np.argmax(values))
    if values[best] <= 0:
        raise NoAllowedRegion(f"No classically allowed region for E={E}, L={L} in {u.describe()}")
    return float(r[best])


def orbit_integrate(
    u: PotentialSpec, E: float, L: float, r_start: float, direction: int = 1, n_steps: int = 2000
) -> OrbitSample:
    """One radial sweep of a bound orbit between its turning points.

    Uses r(psi) = rbar - Delta cos(psi) on [0, pi], which removes the endpoint
    singularity of dtheta/dr; theta is accumulated panel by panel with adaptive quadrature.
    direction = +1 runs from the inner to the outer turning point, -1 the other way.
    """
    if direction not in (1, -1):
        raise PreconditionViolated(f"direction must be +1 or -1, got {direction}")
    _require_real(u)
    radicand = _radicand(u, E, L)
    if radicand(r_start) <= 0:
        raise NoAllowedRegion(f"r_start={r_start} is outside the allowed region (radicand {radicand(r_start):.3e})")

    r_lo = _turning_point(radicand, r_start, 0.5)
    r_hi = _turning_point(radicand, r_start, 2.0)
    rbar, spread = (r_lo + r_hi) / 2, (r_hi - r_lo) / 2

    def dtheta(psi: float) -> float:
        r = rbar - spread * math.cos(psi)
        value = radicand(r)
        if value <= 0:
            return 0.0
        return (L / (r * r)) * spread * math.sin(psi) / math.sqrt(value)

    psi = np.linspace(0.0, math.pi, n_steps + 1)
    increments = [quad(dtheta, a, b, epsabs=1e-14, epsrel=1e-12, limit=200)[0] for a, b in zip(psi[:-1], psi[1:])]
    theta = np.concatenate(([0.0], np.cumsum(increments)))
    radii = rbar - spread * np.cos(psi)
    if direction == -1:
        radii = radii[::-1]
        theta = theta[-1] - theta[::-1]
    points = list(zip(radii.tolist(), theta.tolist()))
    return OrbitSample(
        points=points, E=E, L=L, r_turn_lo=r_lo, r_turn_hi=r_hi, apsidal_angle=float(theta[-1] - theta[0])
    )


def circular_apsidal_angle(u: PotentialSpec, r: float) -> float:
    """pi / sqrt(3 + r U''/U'), the limit for nearly circular orbits"""
    d1, d2 = _force_derivatives(u, r)
    if d1 == 0:
        raise NoAllowedRegion(f"No circular orbit at r={r}: the force vanishes")
    ratio = 3 + r * d2 / d1
    if ratio <= 0:
        raise NoAllowedRegion(f"Circular orbit at r={r} is unstable")
    return math.pi / math.sqrt(ratio)


def apsidal_angle(u: PotentialSpec, E: float, L: float, n_steps: int = 2000) -> float:
    """Angle swept between the inner and the outer turning point"""
    radicand = _radicand(u, E, L)
    r = find_allowed_radius(u, E, L)
    if radicand(r) < 1e-12 * max(1.0, abs(E)):
        logger.debug(f"Orbit at E={E}, L={L} is circular at r={r:.10g}")
        return circular_apsidal_angle(u, r)
    return orbit_integrate(u, E, L, r, 1, n_steps).apsidal_angle


def identity_classical_map(u: PotentialSpec, E: float, L: float) -> Tuple[PotentialSpec, ClassicalMap]:
    """The map (r, theta) -> (r, theta) with u as its own image"""
    duality = DualityMap(
        coord_exponent=1.0,
        energy_coupling_factor=1.0,
        angular_scale=1.0,
        wavefn_prefactor_exponent=0.0,
        pivot_index=-1,
        dims=(u.dimension, u.dimension),
        quantum=False,
    )
    return u, ClassicalMap(coord_exponent=1.0, pivot_index=-1, dual_energy=E, L=L, duality=duality)


def map_orbit(sample: OrbitSample, cmap: ClassicalMap) -> List[Tuple[float, float]]:
    """(r, theta) -> (r^s, s theta)"""
    s = cmap.coord_exponent
    return [(r**s, s * theta) for r, theta in sample.points]


def orbit_dual_check(
    sample: OrbitSample, u: PotentialSpec, cmap: ClassicalMap, dual_potential: Optional[PotentialSpec] = None
) -> float:
    """Max relative residual of the dual orbit equation along the mapped sample.

    dphi/drho is taken by second-order differences; samples within 5% of either turning
    point are skipped.
    """
    if dual_potential is None:
        if cmap.pivot_index < 0:
            dual_potential = u
        else:
            dual_potential, _ = classical_dual(u, sample.E, sample.L, cmap.pivot_index)
    mapped = np.array(map_orbit(sample, cmap))
    rho, phi = mapped[:, 0], mapped[:, 1]
    order = np.argsort(rho)
    rho, phi = rho[order], phi[order]
    slope = np.abs(np.gradient(phi, rho))
    radicand = _radicand(dual_potential, cmap.dual_energy, cmap.L)(rho)
    n = rho.size
    lo, hi = int(END_EXCLUSION * n), int((1 - END_EXCLUSION) * n)
    expected = (cmap.L / rho[lo:hi] ** 2) / np.sqrt(np.maximum(radicand[lo:hi], 1e-300))
    residual = np.abs(slope[lo:hi] - expected) / np.abs(expected)
    worst = float(np.max(residual))
    logger.debug(f"Orbit dual check over {hi - lo} samples: max residual {worst:.3e}")
    return worst
