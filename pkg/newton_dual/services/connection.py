"""Connection coefficients of the regular Heun solution.

For real x -> infinity, N(p, x) = K1 B+(p, x) + K2 H+(p, x). K2 follows from the
moment integral J of the dual parameter set p':

    K2(p) = G(p) J_{1+alpha'}(p'),
    G(p)  = Gamma(1+alpha) / [Gamma((alpha-gamma)/2) Gamma(1+(alpha+gamma)/2)],
    J_lam(p) = int_0^inf x^(lam-1) e^(-x^2 - beta x) N(p, x) dx.

The integrand of J(p') behaves like K2(p') x^s' at large x with s' = (gamma-alpha)/2 - 1,
so J is evaluated as a tanh-sinh quadrature on [0, X] plus the analytic tail
K2(p') T(X), T(X) = -Sum e'_n X^(s'-n+1)/(s'-n+1). When the integral diverges the
same expression is its analytic continuation. K2(p') is read off by matching N to
H+ at X.
"""

import math
from abc import ABC, abstractmethod
from typing import Callable

import numpy as np
from loguru import logger
from pydantic import BaseModel
from scipy.special import gamma as gamma_fn
from scipy.special import rgamma

from newton_dual.exceptions import (
    IllConditioned,
    Indeterminate,
    IntegrandDiverged,
    PreconditionViolated,
    QuadratureFailed,
)
from newton_dual.node_pool.tanh_sinh_pool import TanhSinhNodePool
from newton_dual.schemas.schemas import HeunParams, QuadratureControl, SeriesControl
from newton_dual.services.heunfn import (
    _is_nonpositive_integer,
    asymptotic_series,
    check_alpha,
    heun_regular,
    heun_regular_line,
    irregular_coefficients,
    irregular_prefactor,
    truncate_optimally,
)

POLE_TOL = 1e-9
MIN_LEVEL = 3
MAX_CUTOFF = 20.0
ILL_CONDITIONED = 1e12


class QuadratureEstimate(BaseModel):
    value: complex
    error: float
    levels: int
    nodes: int


class K1Result(BaseModel):
    value: complex
    conditioning: float


def tanh_sinh_integrate(
    integrand: Callable[[np.ndarray], np.ndarray], upper: float, q: QuadratureControl
) -> QuadratureEstimate:
    """Integrate a vectorised integrand over [0, upper] with level doubling"""
    pool = TanhSinhNodePool()
    raw = 0j
    previous = None
    change = math.nan
    nodes = 0
    for level in range(q.max_levels + 1):
        table = pool.get_level(level)
        values = integrand(upper * table.x) * table.w
        values = np.where(table.w == 0, 0, values)
        if not np.all(np.isfinite(values)):
            raise IntegrandDiverged(f"Integrand not finite at level {level} nodes")
        raw += upper * np.sum(values)
        nodes += table.x.size
        estimate = raw * table.h
        if previous is not None:
            change = abs(estimate - previous)
            if level >= MIN_LEVEL and change <= max(q.abs_tol, q.rel_tol * abs(estimate)):
                logger.debug(f"Tanh-sinh converged at level {level} ({nodes} nodes), error {change:.2e}")
                return QuadratureEstimate(value=complex(estimate), error=change, levels=level, nodes=nodes)
        previous = estimate
    raise QuadratureFailed(
        f"Tanh-sinh quadrature missed tolerance after {q.max_levels} levels (last change {change:.3e})"
    )


def _moment_integrand(lam: complex, p: HeunParams, ctl: SeriesControl):
    def integrand(x: np.ndarray) -> np.ndarray:
        xc = x.astype(complex)
        return xc ** (lam - 1) * np.exp(-xc * xc - p.beta * xc) * heun_regular_line(p, x, ctl)

    return integrand


def _matching_cutoff(p: HeunParams, q: QuadratureControl) -> float:
    """Smallest cutoff >= q.tail_cutoff where the H+ expansion is accurate"""
    x = q.tail_cutoff
    while True:
        _, error = asymptotic_series(p, x, "H")
        if error <= 1e-12 or x >= MAX_CUTOFF:
            if error > 1e-8:
                raise QuadratureFailed(
                    f"H+ expansion for {p.alpha, p.gamma} not accurate up to x={x} (relative error {error:.1e})"
                )
            return x
        x = min(MAX_CUTOFF, x + 2.0)


def k2_asymptotic(p: HeunParams, q: QuadratureControl = QuadratureControl(), ctl: SeriesControl = SeriesControl()) -> complex:
    """K2 read off directly as N(p, X) / H+(p, X) at the matching radius"""
    check_alpha(p.alpha)
    x = _matching_cutoff(p, q)
    series, _ = asymptotic_series(p, x, "H")
    h_plus = irregular_prefactor(p, x, "H") * series
    return complex(heun_regular(p, x, ctl) / h_plus)


def _tail(p: HeunParams, lam: complex, upper: float) -> complex:
    """-Sum e_n X^(s-n+1)/(s-n+1) with s = lam - 1 + sigma, optimally truncated"""
    sigma = -(p.alpha + p.gamma + 2) / 2
    s = lam - 1 + sigma
    coeffs = irregular_coefficients(p, "H", 120)
    terms = np.zeros(coeffs.size, dtype=complex)
    for n, e_n in enumerate(coeffs):
        if e_n != 0:
            terms[n] = -e_n * upper ** (s - n + 1) / (s - n + 1)
    total, _ = truncate_optimally(terms)
    return total


def j_integral(
    lam: complex,
    p: HeunParams,
    q: QuadratureControl = QuadratureControl(),
    ctl: SeriesControl = SeriesControl(),
) -> complex:
    """Convergent moment integral int_0^inf x^(lam-1) e^(-x^2-beta x) N(p, x) dx.

    Integrands that decay algebraically get the analytic tail beyond the cutoff;
    integrands that do not decay raise IntegrandDiverged.
    """
    lam = complex(lam)
    if lam.real <= 0:
        raise PreconditionViolated(f"J integral needs Re(lambda) > 0, got {lam}")
    check_alpha(p.alpha)
    upper = q.tail_cutoff
    integrand = _moment_integrand(lam, p, ctl)
    estimate = tanh_sinh_integrate(integrand, upper, q)
    edge = abs(integrand(np.array([upper]))[0]) * upper
    if edge <= max(q.abs_tol, q.rel_tol * abs(estimate.value)):
        return estimate.value

    sigma = -(p.alpha + p.gamma + 2) / 2
    if (lam - 1 + sigma).real >= -1:
        raise IntegrandDiverged(
            f"Integrand of J_{lam} does not decay (x^{lam - 1 + sigma} tail); the integral diverges"
        )
    amplitude = k2_asymptotic(p, q, ctl)
    return estimate.value + amplitude * _tail(p, lam, _matching_cutoff(p, q))


def k2_closed_beta0_delta0(alpha: complex, gamma: complex) -> complex:
    """K2(alpha, 0, gamma, 0) = Gamma(1+alpha/2) / Gamma(1/2 + alpha/4 - gamma/4)"""
    den = 0.5 + complex(alpha) / 4 - complex(gamma) / 4
    nearest = round(den.real)
    if nearest <= 0 and abs(den - nearest) < POLE_TOL:
        return 0j
    return complex(gamma_fn(1 + complex(alpha) / 2) * rgamma(den))


def k2(p: HeunParams, q: QuadratureControl = QuadratureControl(), ctl: SeriesControl = SeriesControl()) -> complex:
    """K2(p) from the regularised J integral of the dual parameter set"""
    check_alpha(p.alpha)
    pd = p.dual()
    if _is_nonpositive_integer(1 + pd.alpha):
        raise Indeterminate(
            f"Gamma(1+(alpha+gamma)/2) is at a pole for alpha={p.alpha}, gamma={p.gamma}; "
            "the dual regular solution does not exist"
        )
    w = (p.alpha - p.gamma) / 2
    upper = _matching_cutoff(pd, q)
    amplitude = k2_asymptotic(pd, q, ctl)

    m = round(-w.real)
    if m >= 0 and abs(w + m) < POLE_TOL:
        # G vanishes; G*T' keeps the finite limit of its pole term.
        e_m = irregular_coefficients(pd, "H", m + 1)[m]
        limit = (-1) ** m * math.factorial(m) * e_m * gamma_fn(1 + p.alpha) * rgamma(1 + pd.alpha)
        logger.debug(f"K2 at Gamma pole m={m}: e'_m={e_m}, limit={limit}")
        return complex(limit * amplitude)

    prefactor = gamma_fn(1 + p.alpha) * rgamma(w) * rgamma(1 + pd.alpha)
    lam = 1 + pd.alpha
    integral = tanh_sinh_integrate(_moment_integrand(lam, pd, ctl), upper, q)
    tail = _tail(pd, lam, upper)
    value = prefactor * (integral.value + amplitude * tail)
    logger.debug(
        f"K2({p.alpha:.6g}, {p.beta:.6g}, {p.gamma:.6g}, {p.delta:.6g}) = {value:.12g} "
        f"[I={integral.value:.6g}, K2'={amplitude:.6g}, T'={tail:.6g}, levels={integral.levels}]"
    )
    return complex(value)


def k1(
    p: HeunParams,
    q: QuadratureControl = QuadratureControl(),
    z_match: complex = 6.0,
    ctl: SeriesControl = SeriesControl(),
) -> K1Result:
    """K1 by matching N = K1 B+ + K2 H+ at z_match, with conditioning |K2 H+| / |K1 B+|"""
    z = complex(z_match)
    b_series, b_err = asymptotic_series(p, z, "B")
    h_series, h_err = asymptotic_series(p, z, "H")
    if max(b_err, h_err) > 1e-8:
        raise PreconditionViolated(f"z_match={z} is outside the asymptotic region (series error {max(b_err, h_err):.1e})")
    b_plus = irregular_prefactor(p, z, "B") * b_series
    h_plus = irregular_prefactor(p, z, "H") * h_series
    coefficient = k2(p, q, ctl)
    growing = coefficient * h_plus
    value = (heun_regular(p, z, ctl) - growing) / b_plus
    decaying = abs(value * b_plus)
    conditioning = abs(growing) / decaying if decaying > 0 else (0.0 if growing == 0 else math.inf)
    if conditioning > ILL_CONDITIONED:
        raise IllConditioned(f"|K2 H+| exceeds |K1 B+| by {conditioning:.2e} at z={z}")
    return K1Result(value=complex(value), conditioning=conditioning)


def s_matrix(p: HeunParams, q: QuadratureControl = QuadratureControl()) -> complex:
    """S = exp(2 i delta) with delta = -arg K2"""
    value = k2(p, q)
    if value == 0:
        raise Indeterminate("K2 vanishes; the phase is undefined")
    return value.conjugate() / value


class ConnectionStrategy(ABC):
    """Abstract base class for K2 evaluation"""

    @abstractmethod
    def connection_coefficient(self, p: HeunParams) -> complex:
        pass


class ClosedFormConnection(ConnectionStrategy):
    """Gamma-ratio K2, valid only when beta = delta = 0"""

    def connection_coefficient(self, p: HeunParams) -> complex:
        if p.beta != 0 or p.delta != 0:
            raise PreconditionViolated("Closed-form K2 needs beta = delta = 0")
        return k2_closed_beta0_delta0(p.alpha, p.gamma)


class QuadratureConnection(ConnectionStrategy):
    def __init__(self, q: QuadratureControl = QuadratureControl(), ctl: SeriesControl = SeriesControl()):
        """Initialise with quadrature and series controls"""
        self.q = q
        self.ctl = ctl

    def connection_coefficient(self, p: HeunParams) -> complex:
        return k2(p, self.q, self.ctl)


def select_connection(
    p: HeunParams, q: QuadratureControl = QuadratureControl(), ctl: SeriesControl = SeriesControl()
) -> ConnectionStrategy:
    if p.beta == 0 and p.delta == 0:
        return ClosedFormConnection()
    return QuadratureConnection(q, ctl)
