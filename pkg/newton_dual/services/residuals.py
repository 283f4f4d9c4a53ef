"""Radial-equation residual under a duality map.

If u'' + Q_U(r) u = 0 and r = g(rho), then v = u(g(rho)) / sqrt(g'(rho)) solves
v'' + [g'^2 Q_U(g) + S(g)/2] v = 0, S the Schwarzian derivative. A dual pair is
consistent when that bracket equals E_V - L_V(L_V+1)/rho^2 - V(rho) identically.
"""

from typing import Union

import numpy as np
import sympy as sp
from loguru import logger

from newton_dual.exceptions import PreconditionViolated
from newton_dual.schemas.schemas import DualityMap, ExpLogMap, PotentialSpec, RadialState
from newton_dual.services.duality import map_coordinate

_RHO = sp.Symbol("rho", positive=True)


def _potential_expr(u: PotentialSpec, x: sp.Expr) -> sp.Expr:
    if u.kind == "exponential":
        return sp.Float(u.xi) * sp.exp(sp.Float(u.sigma) * x)
    if u.kind == "logsquared":
        return sp.Float(u.eta) / (x * sp.log(sp.Float(u.alpha_scale) * x)) ** 2
    total = sp.Integer(0)
    for t in u.terms:
        coeff = t.coeff.real if t.coeff.imag == 0 else t.coeff
        total += sp.sympify(coeff) * x ** sp.Float(t.power)
    return total


def _inverse_coordinate(m: Union[DualityMap, ExpLogMap]) -> sp.Expr:
    """r = g(rho) for the map rho = rho(r)"""
    if isinstance(m, ExpLogMap):
        sigma, alpha = sp.Float(m.sigma), sp.Float(m.alpha_scale)
        if m.direction == "exp_to_log":
            return (2 / sigma) * sp.log(alpha * _RHO)
        return sp.exp(sigma * _RHO / 2) / alpha
    return _RHO ** (1 / sp.Float(m.coord_exponent))


def schwarzian(g: sp.Expr, x: sp.Symbol = _RHO) -> sp.Expr:
    d1, d2, d3 = (sp.diff(g, x, k) for k in (1, 2, 3))
    return d3 / d1 - sp.Rational(3, 2) * (d2 / d1) ** 2


def _sample_radii(u: PotentialSpec, n_samples: int) -> np.ndarray:
    if u.kind == "logsquared":
        return np.exp(np.linspace(0.1, 1.5, n_samples)) / u.alpha_scale
    return np.linspace(0.3, 3.0, n_samples)


def transformed_equation_residual(
    u: PotentialSpec,
    state: RadialState,
    mapping: Union[DualityMap, ExpLogMap],
    v: PotentialSpec,
    dual_state: RadialState,
    n_samples: int = 50,
) -> float:
    """Max deviation between U's transformed radial equation and V's, relative to the largest term"""
    if n_samples < 2:
        raise PreconditionViolated(f"Need at least two samples, got {n_samples}")
    g = _inverse_coordinate(mapping)
    g1 = sp.diff(g, _RHO)
    L_u = state.effective_l
    L_v = dual_state.effective_l

    transformed = g1**2 * (state.E - L_u * (L_u + 1) / g**2 - _potential_expr(u, g)) + schwarzian(g) / 2
    centrifugal = L_v * (L_v + 1) / _RHO**2
    potential = _potential_expr(v, _RHO)

    lhs = sp.lambdify(_RHO, transformed, "numpy")
    cent = sp.lambdify(_RHO, centrifugal, "numpy")
    pot = sp.lambdify(_RHO, potential, "numpy")

    rho = np.asarray(map_coordinate(mapping, _sample_radii(u, n_samples)), dtype=float)
    left = np.broadcast_to(np.asarray(lhs(rho), dtype=complex), rho.shape)
    c = np.broadcast_to(np.asarray(cent(rho), dtype=complex), rho.shape)
    w = np.broadcast_to(np.asarray(pot(rho), dtype=complex), rho.shape)
    right = dual_state.E - c - w

    scale = max(np.max(np.abs(left)), abs(dual_state.E), np.max(np.abs(c)), np.max(np.abs(w)))
    residual = float(np.max(np.abs(left - right)) / scale)
    logger.debug(f"Transformed-equation residual {u.describe()} -> {v.describe()}: {residual:.3e}")
    return residual
