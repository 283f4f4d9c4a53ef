"""Biconfluent Heun function N(alpha, beta, gamma, delta, z).

The equation is

    z y'' + (1 + alpha - beta z - 2 z^2) y' + {(gamma - alpha - 2) z - c1} y = 0,
    c1 = (delta + beta (1 + alpha)) / 2.

N is the solution regular at z = 0 with N(0) = 1. Its Taylor coefficients obey
(m+1)(m+1+alpha) c_{m+1} = (beta m + c1) c_m - (gamma - alpha - 2m) c_{m-1};
with c_n = A_n / ((1+alpha)_n n!) this is the usual A_n recurrence. At infinity
the two irregular solutions are

    B+ = z^rho Sum a_n z^-n,                 rho = (gamma - alpha - 2) / 2
    H+ = z^sigma e^(z^2 + beta z) Sum e_n z^-n, sigma = -(alpha + gamma + 2) / 2
"""

import math
from functools import lru_cache
from typing import Literal, Tuple

import numpy as np
from loguru import logger
from scipy.integrate import solve_ivp

from newton_dual.exceptions import (
    DivergentTail,
    InvalidAlpha,
    InvalidB,
    NonConvergent,
    PreconditionViolated,
)
from newton_dual.schemas.schemas import HeunParams, SeriesControl

Branch = Literal["B", "H"]

_INTEGER_TOL = 1e-12
CANCELLATION_LIMIT = 1e4
MIN_CONTINUATION_START = 0.25
ODE_RTOL = 1e-13


def _is_nonpositive_integer(value: complex) -> bool:
    value = complex(value)
    if abs(value.imag) > _INTEGER_TOL:
        return False
    nearest = round(value.real)
    return nearest <= 0 and abs(value.real - nearest) <= _INTEGER_TOL


def check_alpha(alpha: complex) -> None:
    """Raise InvalidAlpha when (1+alpha)_n vanishes for some n"""
    if _is_nonpositive_integer(complex(alpha) + 1):
        raise InvalidAlpha(f"alpha={alpha} is a negative integer; (1+alpha)_n vanishes")


def pochhammer(a: complex, n: int) -> complex:
    """Rising factorial (a)_n = a (a+1) ... (a+n-1); exactly 1 for n = 0"""
    if n < 0:
        raise PreconditionViolated(f"pochhammer needs n >= 0, got {n}")
    result = 1
    for k in range(n):
        result *= a + k
    return result


class _CompensatedSum:
    """Kahan summation over numpy arrays"""

    def __init__(self, first: np.ndarray) -> None:
        self.total = first.copy()
        self._comp = np.zeros_like(first)

    def add(self, term: np.ndarray) -> None:
        y = term - self._comp
        s = self.total + y
        self._comp = (s - self.total) - y
        self.total = s


def _minimum_terms(x: np.ndarray, beta: complex) -> int:
    # Terms of an e^(z^2)-type series keep growing until n ~ 2|z|^2; stopping earlier
    # would accept a transient dip of a nearly terminating series.
    if x.size == 0:
        return 0
    r = float(np.max(np.abs(x)))
    return int(2 * r * r + abs(beta) * r)


def heun_regular_array(p: HeunParams, x, ctl: SeriesControl = SeriesControl()) -> np.ndarray:
    """Evaluate N(p, x) on an array of real or complex points.

    The recurrence runs on the terms t_m = c_m x^m directly so large |x| never
    overflows a power. Truncation stops once ctl.consecutive_small successive terms
    are each at most ctl.rel_tol of the running sum at every point, and not before
    the terms have passed their peak.
    """
    check_alpha(p.alpha)
    x = np.atleast_1d(np.asarray(x, dtype=complex))
    a, b, g, c1 = p.alpha, p.beta, p.gamma, p.c1
    x2 = x * x

    t_prev = np.zeros_like(x)
    t = np.ones_like(x)
    acc = _CompensatedSum(t)
    small = np.zeros(x.shape, dtype=int)
    min_terms = _minimum_terms(x, b)

    for m in range(ctl.max_terms):
        t_next = ((b * m + c1) * t * x - (g - a - 2 * m) * t_prev * x2) / ((m + 1) * (m + 1 + a))
        acc.add(t_next)
        small = np.where(np.abs(t_next) <= ctl.rel_tol * np.abs(acc.total), small + 1, 0)
        if m + 1 >= min_terms and np.all(small >= ctl.consecutive_small):
            return acc.total
        t_prev, t = t, t_next

    raise NonConvergent(
        f"Regular Heun series for {p.alpha, p.beta, p.gamma, p.delta} not converged in {ctl.max_terms} terms "
        f"(max |x| = {np.max(np.abs(x)):.3g})"
    )


def regular_coefficients(p: HeunParams, n: int) -> np.ndarray:
    """First n coefficients A_n of N = Sum A_n / ((1+alpha)_n n!) z^n"""
    check_alpha(p.alpha)
    a, b, g, c1 = p.alpha, p.beta, p.gamma, p.c1
    coeffs = np.zeros(n, dtype=complex)
    if n > 0:
        coeffs[0] = 1.0
    if n > 1:
        coeffs[1] = c1
    for k in range(n - 2):
        coeffs[k + 2] = (b * (k + 1) + c1) * coeffs[k + 1] - (k + 1) * (k + 1 + a) * (g - a - 2 - 2 * k) * coeffs[k]
    return coeffs


def heun_regular(p: HeunParams, z: complex, ctl: SeriesControl = SeriesControl()) -> complex:
    z = complex(z)
    if z.imag == 0 and z.real > continuation_start(p):
        return complex(heun_regular_line(p, [z.real], ctl)[0])
    return complex(heun_regular_array(p, [z], ctl)[0])


def continuation_start(p: HeunParams) -> float:
    """Largest real x at which the Taylor sum of N loses at most CANCELLATION_LIMIT.

    Term magnitudes follow e^(x^2 + |beta| x) while N follows e^(x^2 + Re(beta) x).
    """
    loss_rate = abs(p.beta) - complex(p.beta).real
    if loss_rate <= _INTEGER_TOL:
        return np.inf
    return max(math.log(CANCELLATION_LIMIT) / loss_rate, MIN_CONTINUATION_START)


def heun_regular_with_derivative(p: HeunParams, x: float, ctl: SeriesControl = SeriesControl()) -> Tuple[complex, complex]:
    """N(p, x) and dN/dx at one point x > 0 from the Taylor series"""
    check_alpha(p.alpha)
    if x <= 0:
        raise PreconditionViolated(f"Derivative series needs x > 0, got {x}")
    a, b, g, c1 = p.alpha, p.beta, p.gamma, p.c1
    x = complex(x)
    t_prev, t = 0j, 1.0 + 0j
    value, slope = 1.0 + 0j, 0j
    small = 0
    min_terms = _minimum_terms(np.array([x]), b)
    for m in range(ctl.max_terms):
        t_next = ((b * m + c1) * t * x - (g - a - 2 * m) * t_prev * x * x) / ((m + 1) * (m + 1 + a))
        value += t_next
        slope += (m + 1) * t_next
        small = small + 1 if abs(t_next) <= ctl.rel_tol * abs(value) else 0
        if m + 1 >= min_terms and small >= ctl.consecutive_small:
            return value, slope / x
        t_prev, t = t, t_next
    raise NonConvergent(f"Derivative series for {p.alpha, p.beta, p.gamma, p.delta} not converged at x={x.real:g}")


@lru_cache(maxsize=256)
def _ode_continuation(p: HeunParams, start: float, reach: float, ctl: SeriesControl):
    a, b, g, c1 = p.alpha, p.beta, p.gamma, p.c1

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        return np.array([y[1], -((1 + a - b * t - 2 * t * t) * y[1] + ((g - a - 2) * t - c1) * y[0]) / t])

    y0 = np.array(heun_regular_with_derivative(p, start, ctl), dtype=complex)
    solution = solve_ivp(rhs, (start, reach), y0, method="DOP853", rtol=ODE_RTOL, atol=1e-300, dense_output=True)
    if not solution.success:
        raise NonConvergent(f"ODE continuation of N from x={start:.4g} to {reach:g} failed: {solution.message}")
    logger.debug(f"Continued N{p.alpha, p.beta, p.gamma, p.delta} from x={start:.4g} to {reach:g} in {solution.t.size} steps")
    return solution.sol


def heun_regular_line(p: HeunParams, x, ctl: SeriesControl = SeriesControl()) -> np.ndarray:
    """N(p, x) on real x >= 0.

    Points beyond continuation_start(p) come from integrating the Heun equation
    outward from there; N grows fastest along the real axis, so the forward
    integration keeps its relative accuracy.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x < 0):
        raise PreconditionViolated("Real-line evaluation needs x >= 0")
    start = continuation_start(p)
    values = np.empty(x.shape, dtype=complex)
    near = x <= start
    if np.any(near):
        values[near] = heun_regular_array(p, x[near], ctl)
    if not np.all(near):
        far = x[~near]
        dense = _ode_continuation(p, start, float(math.ceil(np.max(far))), ctl)
        values[~near] = dense(far)[0]
    return values


def irregular_exponent(p: HeunParams, branch: Branch) -> complex:
    if branch == "B":
        return (p.gamma - p.alpha - 2) / 2
    return -(p.alpha + p.gamma + 2) / 2


def irregular_coefficients(p: HeunParams, branch: Branch, n: int) -> np.ndarray:
    """First n coefficients a_n (branch B) or e_n (branch H) of the asymptotic series"""
    a, b = p.alpha, p.beta
    s = irregular_exponent(p, branch)
    coeffs = np.zeros(n, dtype=complex)
    if n == 0:
        return coeffs
    coeffs[0] = 1.0
    if branch == "B":
        linear = p.c1
        sign = -1.0
    else:
        linear = 0.5 * b * (1 + a) - 0.5 * p.delta
        sign = 1.0
    for m in range(1, n):
        prev2 = coeffs[m - 2] if m >= 2 else 0.0
        k = s - m + 2
        coeffs[m] = ((b * (s - m + 1) + linear) * coeffs[m - 1] + sign * k * (k + a) * prev2) / (2 * m)
    return coeffs


def irregular_prefactor(p: HeunParams, z: complex, branch: Branch) -> complex:
    z = complex(z)
    s = irregular_exponent(p, branch)
    if branch == "B":
        return z**s
    return z**s * np.exp(z * z + p.beta * z)


def _check_asymptotic_region(p: HeunParams, z: complex, n_terms: int) -> None:
    if abs(z) ** 2 < 2 * (abs(p.alpha) + abs(p.gamma) + n_terms):
        raise PreconditionViolated(
            f"|z|^2 = {abs(z) ** 2:.4g} is below 2(|alpha|+|gamma|+n_terms) = "
            f"{2 * (abs(p.alpha) + abs(p.gamma) + n_terms):.4g}; asymptotic series not valid"
        )


def _heun_irregular(p: HeunParams, z: complex, n_terms: int, branch: Branch) -> complex:
    if n_terms < 1:
        raise PreconditionViolated(f"n_terms must be positive, got {n_terms}")
    z = complex(z)
    _check_asymptotic_region(p, z, n_terms)
    coeffs = irregular_coefficients(p, branch, n_terms)
    terms = coeffs * z ** -np.arange(n_terms)
    mags = np.abs(terms)
    for n in range(2, n_terms):
        previous = max(mags[n - 1], mags[n - 2])
        if previous > 0 and mags[n] > previous:
            raise DivergentTail(
                f"{branch}+ series terms grow at n={n} for z={z}; optimal truncation is below {n_terms} terms"
            )
    return complex(irregular_prefactor(p, z, branch) * np.sum(terms))


def heun_irregular_B(p: HeunParams, z: complex, n_terms: int) -> complex:
    """Decaying irregular solution B+ truncated to n_terms"""
    return _heun_irregular(p, z, n_terms, "B")


def heun_irregular_H(p: HeunParams, z: complex, n_terms: int) -> complex:
    """Growing irregular solution H+ truncated to n_terms"""
    return _heun_irregular(p, z, n_terms, "H")


def truncate_optimally(terms, tol: float = 1e-17) -> Tuple[complex, float]:
    """Sum a possibly divergent series up to its smallest term.

    Exact zeros are skipped. Summation stops before the first nonzero term larger
    than the previous nonzero one, or once two successive nonzero terms are below
    tol relative to the sum. The error is the last included nonzero term relative
    to the sum; it is 0 when the series terminates inside the array.
    """
    terms = np.asarray(terms, dtype=complex)
    nonzero = np.flatnonzero(terms)
    if nonzero.size == 0:
        return 0j, 0.0
    total = 0j
    last = np.inf
    included = 0
    small = 0
    for n in nonzero:
        term = complex(terms[n])
        mag = abs(term)
        if not np.isfinite(mag) or (included >= 2 and mag > last):
            break
        total += term
        included += 1
        last = mag
        small = small + 1 if mag <= tol * abs(total) else 0
        if small >= 2:
            break
    else:
        # Two trailing zeros end a three-term recurrence.
        if nonzero[-1] <= terms.size - 3:
            return total, 0.0
    error = last / abs(total) if total != 0 else np.inf
    return total, float(error)


def asymptotic_series(p: HeunParams, z: complex, branch: Branch, max_terms: int = 120) -> Tuple[complex, float]:
    """Optimally truncated asymptotic sum, without prefactor.

    Returns the sum and the magnitude of its smallest included term relative to it.
    """
    z = complex(z)
    coeffs = irregular_coefficients(p, branch, max_terms)
    powers = np.empty(max_terms, dtype=complex)
    power = 1.0 + 0j
    for n in range(max_terms):
        powers[n] = power
        power /= z
    with np.errstate(over="ignore", invalid="ignore"):
        return truncate_optimally(coeffs * powers)


def kummer_1f1(a: complex, b: complex, z: complex, ctl: SeriesControl = SeriesControl()) -> complex:
    """Confluent hypergeometric 1F1(a; b; z) by its power series"""
    if _is_nonpositive_integer(b):
        raise InvalidB(f"1F1 lower parameter b={b} is a non-positive integer")
    z = complex(z)
    term = 1.0 + 0j
    total = 1.0 + 0j
    comp = 0j
    small = 0
    for n in range(ctl.max_terms):
        term *= (a + n) / (b + n) * z / (n + 1)
        y = term - comp
        s = total + y
        comp = (s - total) - y
        total = s
        small = small + 1 if abs(term) <= ctl.rel_tol * abs(total) else 0
        if small >= ctl.consecutive_small and n + 1 >= abs(z):
            return total
    raise NonConvergent(f"1F1({a}; {b}; {z}) not converged in {ctl.max_terms} terms")


def heun_to_kummer(p: HeunParams, z: complex, ctl: SeriesControl = SeriesControl()) -> complex:
    """N(alpha, 0, gamma, 0, z) = 1F1(1/2 + alpha/4 - gamma/4; 1 + alpha/2; z^2)"""
    if p.beta != 0 or p.delta != 0:
        raise PreconditionViolated(f"Kummer reduction needs beta = delta = 0, got beta={p.beta}, delta={p.delta}")
    z = complex(z)
    a = 0.5 + p.alpha / 4 - p.gamma / 4
    b = 1 + p.alpha / 2
    logger.debug(f"Heun -> 1F1({a}; {b}; z^2) at z={z}")
    return kummer_1f1(a, b, z * z, ctl)
