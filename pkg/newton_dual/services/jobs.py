import asyncio
from abc import ABC, abstractmethod
from typing import Any, Dict, List, Optional

import numpy as np
from loguru import logger

from ..exceptions import (
    InputError,
    NewtonDualError,
    NotHeunReducible,
    NumericalError,
    PartialResultWarning,
    ReductionFailed,
    VerificationFailure,
)
from ..middleware.input_guard import (
    complex_value,
    parse_heun_params,
    parse_potential,
    parse_state,
    real_value,
    validate_parameter,
)
from ..node_pool.tanh_sinh_pool import TanhSinhNodePool
from ..schemas.schemas import (
    DualSetMember,
    DualSetResponse,
    ExpLogResponse,
    HeunResponse,
    OrbitResponse,
    PhaseResponse,
    PhaseRow,
    PotentialSpec,
    RadialGrid,
    RunConfig,
    SpectrumRequest,
    SpectrumResponse,
    SpectrumRow,
    VerifyResponse,
    phase_distance,
)
from .connection import k1, k2
from .duality import classical_dual, dual_set_members, exp_log_dual
from .heunfn import heun_irregular_B, heun_irregular_H, heun_regular
from .oracle import (
    apsidal_angle,
    auto_grid,
    fd_bound_spectrum_async,
    fd_phase_shift,
    find_allowed_radius,
    map_orbit,
    orbit_dual_check,
    orbit_integrate,
)
from .spectra import bound_spectrum_async, phase_shift, reduce_to_heun
from .verification import CHECKS, run_check

SPECTRUM_TOLERANCE = 1e-4
PHASE_TOLERANCE = 2e-2
EXTRA_ORACLE_STATES = 4

AnyResponse = (
    DualSetResponse | ExpLogResponse | SpectrumResponse | VerifyResponse | OrbitResponse | HeunResponse | PhaseResponse
)


class ComputationStrategy(ABC):
    """Abstract base class for command computations"""

    def __init__(self, node_pool: TanhSinhNodePool):
        """Initialise with the shared tanh-sinh node pool"""
        self.node_pool = node_pool

    async def warm_nodes(self, config: RunConfig) -> None:
        """Build the quadrature tables up front so concurrent jobs only read them"""
        await asyncio.to_thread(self.node_pool.levels_up_to, config.quadrature.max_levels)

    @abstractmethod
    async def run(self, payload: Dict[str, Any], config: RunConfig) -> AnyResponse:
        """Run the command on a parsed input payload and return its response"""
        pass


def _wrap(action: str, e: Exception) -> NumericalError:
    return NumericalError(f"Error computing {action}: {str(e)}")


def _angular_momenta(payload: Dict[str, Any]) -> List[float]:
    raw = payload.get("l", 0)
    values = raw if isinstance(raw, list) else [raw]
    if not values:
        raise InputError("'l' must be a number or a non-empty list")
    for value in values:
        if not validate_parameter("l", value) or value < 0:
            raise InputError(f"Angular momentum must be a finite number >= 0, got {value!r}")
    return sorted({float(v) for v in values})


def _wave_numbers(payload: Dict[str, Any]) -> List[float]:
    raw = payload.get("k")
    if isinstance(raw, dict):
        start, stop = real_value(raw, "start"), real_value(raw, "stop")
        num = raw.get("num", 10)
        if not isinstance(num, int) or num < 1:
            raise InputError(f"k.num must be a positive integer, got {num!r}")
        values = np.linspace(start, stop, num).tolist()
    elif isinstance(raw, list) and raw:
        values = [real_value({"k": v}, "k") for v in raw]
    else:
        raise InputError("'k' must be a non-empty list or a {start, stop, num} object")
    if any(v <= 0 for v in values):
        raise InputError("Wave numbers must be positive")
    return sorted(set(values))


def _oracle_grid(u: PotentialSpec, l: float, E_estimate: float, config: RunConfig) -> RadialGrid:
    grid = auto_grid(u, l, E_estimate, n_points=config.grid_points)
    if config.r_max is not None:
        grid = RadialGrid(r_min=min(grid.r_min, config.r_max / 10), r_max=config.r_max, n_points=config.grid_points)
    return grid


class Dualize(ComputationStrategy):
    """Dual set of a polynomial potential, or the exponential <-> log-squared image"""

    @staticmethod
    def _reducibility(member: DualSetMember) -> Optional[str]:
        try:
            reduce_to_heun(member.potential, member.state.l, member.state.E)
        except (NotHeunReducible, ReductionFailed) as e:
            return str(e)
        return None

    async def _dual_set(self, potential: PotentialSpec, payload: Dict[str, Any]) -> DualSetResponse:
        state = parse_state(payload, potential, default_energy=1.0)
        members = await asyncio.to_thread(dual_set_members, potential, state)
        problems = await asyncio.gather(*(asyncio.to_thread(self._reducibility, m) for m in members))
        warnings = []
        for i, problem in enumerate(problems):
            if problem is not None:
                message = f"Member {i} ({members[i].potential.describe()}) is not Heun-reducible: {problem}"
                logger.warning(message)
                warnings.append(message)
                members[i] = members[i].model_copy(update={"heun_reducible": False})
        return DualSetResponse(input_potential=potential, members=members, pairwise_dual=True, warnings=warnings)

    async def _exp_log(self, potential: PotentialSpec, payload: Dict[str, Any]) -> ExpLogResponse:
        state = parse_state(payload, potential)
        alpha_scale = real_value(payload, "alpha_scale", 1.0)
        sigma = real_value(payload, "sigma", 2.0)
        v, dual_state, mapping = await asyncio.to_thread(exp_log_dual, potential, state, alpha_scale, sigma)
        coupling = potential.xi if potential.kind == "exponential" else potential.eta
        dual_coupling = v.xi if v.kind == "exponential" else v.eta
        swapped = {
            "l(l+1)": state.l * (state.l + 1),
            "dual_l(l+1)": dual_state.l * (dual_state.l + 1),
            "E": state.E,
            "dual_E": dual_state.E,
            "coupling": coupling,
            "dual_coupling": dual_coupling,
        }
        return ExpLogResponse(
            input_potential=potential,
            input_state=state,
            dual_potential=v,
            dual_state=dual_state,
            duality_map=mapping,
            swapped=swapped,
        )

    async def run(self, payload: Dict[str, Any], config: RunConfig) -> DualSetResponse | ExpLogResponse:
        potential = parse_potential(payload)
        logger.info(f"Dualising {potential.describe()}")
        try:
            if potential.kind == "polynomial":
                return await self._dual_set(potential, payload)
            return await self._exp_log(potential, payload)
        except (NewtonDualError, ValueError):
            raise
        except Exception as e:
            raise _wrap(f"dual set of {potential.describe()}", e) from e


class Spectrum(ComputationStrategy):
    """K2-zero bound states for each requested l, with the finite-difference cross-check"""

    async def _rows(self, request: SpectrumRequest, config: RunConfig) -> List[SpectrumRow]:
        states = await bound_spectrum_async(request, config.quadrature, config.series)
        oracle: List[Optional[float]] = [None] * len(states)
        try:
            grid = _oracle_grid(request.potential, request.l, max(s.E for s in states), config)
            fd = await fd_bound_spectrum_async(request.potential, request.l, grid, len(states) + EXTRA_ORACLE_STATES)
            fd_values = np.array([level.E for level in fd])
            oracle = [float(fd_values[np.argmin(np.abs(fd_values - s.E))]) for s in states]
        except NumericalError as e:
            logger.warning(f"Oracle failed for l={request.l}: {str(e)}")

        rows = []
        for state, E_oracle in zip(states, oracle):
            rel_diff = None if E_oracle is None else abs(state.E - E_oracle) / max(abs(E_oracle), 1e-300)
            rows.append(
                SpectrumRow(
                    l=request.l,
                    n_r=state.n_r,
                    E_K2=state.E,
                    E_oracle=E_oracle,
                    rel_diff=rel_diff,
                    k2_residual=state.k2_residual,
                    at_window_edge=state.at_window_edge,
                )
            )
        return rows

    async def run(self, payload: Dict[str, Any], config: RunConfig) -> SpectrumResponse:
        potential = parse_potential(payload)
        ls = _angular_momenta(payload)
        window = payload.get("energy_window")
        if not isinstance(window, list) or len(window) != 2:
            raise InputError("'energy_window' must be a [E_lo, E_hi] pair")
        tolerance = real_value(payload, "tolerance", SPECTRUM_TOLERANCE)
        logger.info(f"Spectrum of {potential.describe()} for l in {ls}, window {window}")
        try:
            requests = [
                SpectrumRequest(
                    potential=potential,
                    l=l,
                    energy_window=(real_value({"E": window[0]}, "E"), real_value({"E": window[1]}, "E")),
                    max_states=payload.get("max_states", 10),
                    scan_points=payload.get("scan_points", 128),
                )
                for l in ls
            ]
            await self.warm_nodes(config)
            groups = await asyncio.gather(*(self._rows(req, config) for req in requests))
        except (NewtonDualError, ValueError):
            raise
        except Exception as e:
            raise _wrap(f"spectrum of {potential.describe()}", e) from e
        rows = sorted((row for group in groups for row in group), key=lambda r: (r.l, r.E_K2))
        return SpectrumResponse(potential=potential, l_values=ls, rows=rows, tolerance=tolerance)


class Verify(ComputationStrategy):
    """Named verification checks, run concurrently and reported in request order"""

    async def run(self, payload: Dict[str, Any], config: RunConfig) -> VerifyResponse:
        names = payload.get("checks") or list(CHECKS)
        if not isinstance(names, list):
            raise InputError("'checks' must be a list of check names")
        unknown = [n for n in names if n not in CHECKS]
        if unknown:
            raise InputError(f"Unknown checks {unknown}; available: {sorted(CHECKS)}")
        logger.info(f"Running {len(names)} verification checks")
        await self.warm_nodes(config)
        outcomes = await asyncio.gather(*(asyncio.to_thread(run_check, name) for name in names))
        checks = [result for outcome in outcomes for result in outcome]
        passed = sum(1 for c in checks if c.passed)
        return VerifyResponse(checks=checks, passed=passed, failed=len(checks) - passed)


class Orbit(ComputationStrategy):
    """Classical orbit of one sweep between turning points and its image under the classical dual map"""

    async def run(self, payload: Dict[str, Any], config: RunConfig) -> OrbitResponse:
        potential = parse_potential(payload)
        E, L = real_value(payload, "E"), real_value(payload, "L")
        pivot = payload.get("pivot", 0)
        n_steps = payload.get("n_steps", 2000)
        direction = payload.get("direction", 1)
        if not isinstance(pivot, int) or not isinstance(n_steps, int) or n_steps < 10:
            raise InputError("'pivot' must be an integer and 'n_steps' an integer >= 10")
        logger.info(f"Orbit of {potential.describe()} at E={E}, L={L}")
        try:
            v, cmap = await asyncio.to_thread(classical_dual, potential, E, L, pivot)
            if "r_start" in payload:
                r_start = real_value(payload, "r_start")
            else:
                r_start = await asyncio.to_thread(find_allowed_radius, potential, E, L)
            sample, dual_angle = await asyncio.gather(
                asyncio.to_thread(orbit_integrate, potential, E, L, r_start, direction, n_steps),
                asyncio.to_thread(apsidal_angle, v, cmap.dual_energy, L, n_steps),
            )
            residual = await asyncio.to_thread(orbit_dual_check, sample, potential, cmap, v)
        except (NewtonDualError, ValueError):
            raise
        except Exception as e:
            raise _wrap(f"orbit of {potential.describe()}", e) from e
        return OrbitResponse(
            potential=potential,
            dual_potential=v,
            orbit=sample,
            dual_points=map_orbit(sample, cmap),
            apsidal_angle=sample.apsidal_angle,
            dual_apsidal_angle=dual_angle,
            max_residual=residual,
        )


class Heun(ComputationStrategy):
    """Single Heun function or connection coefficient value"""

    async def run(self, payload: Dict[str, Any], config: RunConfig) -> HeunResponse:
        kind = payload.get("kind", "regular")
        if kind not in ("regular", "B", "H", "K2", "K1"):
            raise InputError(f"Unknown Heun kind {kind!r}")
        p = parse_heun_params(payload)
        z = complex_value("z", payload["z"]) if "z" in payload else None
        n_terms = payload.get("n_terms", 20)
        if kind in ("regular", "B", "H") and z is None:
            raise InputError(f"Heun kind {kind} needs 'z'")
        if not isinstance(n_terms, int) or n_terms < 1:
            raise InputError(f"'n_terms' must be a positive integer, got {n_terms!r}")
        conditioning = None
        try:
            if kind == "regular":
                value = await asyncio.to_thread(heun_regular, p, z, config.series)
            elif kind == "B":
                value = await asyncio.to_thread(heun_irregular_B, p, z, n_terms)
            elif kind == "H":
                value = await asyncio.to_thread(heun_irregular_H, p, z, n_terms)
            else:
                await self.warm_nodes(config)
                if kind == "K2":
                    value = await asyncio.to_thread(k2, p, config.quadrature, config.series)
                else:
                    z = z if z is not None else complex(6.0)
                    result = await asyncio.to_thread(k1, p, config.quadrature, z, config.series)
                    value, conditioning = result.value, result.conditioning
        except (NewtonDualError, ValueError):
            raise
        except Exception as e:
            raise _wrap(f"Heun {kind}", e) from e
        logger.debug(f"Heun {kind} = {value}")
        return HeunResponse(kind=kind, params=p, z=z, value=value, conditioning=conditioning)


class Phase(ComputationStrategy):
    """Phase shifts over a k-grid from K2, cross-checked against radial integration"""

    async def _row(self, potential: PotentialSpec, l: int, k: float, grid: RadialGrid, config: RunConfig) -> PhaseRow:
        delta = await asyncio.to_thread(phase_shift, potential, l, k, config.quadrature, config.series)
        try:
            oracle = await asyncio.to_thread(fd_phase_shift, potential, l, k, grid)
        except NumericalError as e:
            logger.warning(f"Oracle phase failed at k={k}: {str(e)}")
            return PhaseRow(k=k, delta_K2=delta, delta_oracle=None, abs_diff=None)
        return PhaseRow(k=k, delta_K2=delta, delta_oracle=oracle, abs_diff=phase_distance(delta, oracle))

    async def run(self, payload: Dict[str, Any], config: RunConfig) -> PhaseResponse:
        potential = parse_potential(payload)
        l = payload.get("l", 0)
        if not isinstance(l, int) or l < 0:
            raise InputError(f"Phase shifts need an integer l >= 0, got {l!r}")
        ks = _wave_numbers(payload)
        tolerance = real_value(payload, "tolerance", PHASE_TOLERANCE)
        grid = RadialGrid(r_max=config.r_max or RadialGrid().r_max, n_points=config.grid_points)
        logger.info(f"Phase shifts of {potential.describe()}, l={l}, {len(ks)} wave numbers")
        try:
            await self.warm_nodes(config)
            rows = await asyncio.gather(*(self._row(potential, l, k, grid, config) for k in ks))
        except (NewtonDualError, ValueError):
            raise
        except Exception as e:
            raise _wrap(f"phase shifts of {potential.describe()}", e) from e
        return PhaseResponse(potential=potential, l=l, rows=sorted(rows, key=lambda r: r.k), tolerance=tolerance)


def outcome_error(response: AnyResponse) -> Optional[NewtonDualError]:
    """The error a finished command reports after its output is written, if any"""
    if isinstance(response, DualSetResponse) and response.warnings:
        return PartialResultWarning(f"{len(response.warnings)} dual set members are not Heun-reducible")
    if isinstance(response, VerifyResponse) and response.failed:
        names = sorted({c.name for c in response.checks if not c.passed})
        return VerificationFailure(f"{response.failed} checks failed: {', '.join(names)}")
    if isinstance(response, (SpectrumResponse, PhaseResponse)):
        diffs = [r.rel_diff if isinstance(r, SpectrumRow) else r.abs_diff for r in response.rows]
        worst = max((d for d in diffs if d is not None), default=0.0)
        if worst > response.tolerance:
            return VerificationFailure(f"Oracle disagreement {worst:.3e} exceeds tolerance {response.tolerance:.1e}")
        if any(d is None for d in diffs):
            return PartialResultWarning("The oracle produced no value for some rows")
    return None

