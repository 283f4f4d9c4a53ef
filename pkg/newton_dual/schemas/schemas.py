from __future__ import annotations

import math
from datetime import datetime
from enum import Enum
from typing import Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

SCHEMA_TAG = "newton-dual/v1"


class HeunParams(BaseModel):
    """Parameters (alpha, beta, gamma, delta) of the biconfluent Heun equation"""

    model_config = ConfigDict(frozen=True)

    alpha: complex
    beta: complex = 0j
    gamma: complex = 0j
    delta: complex = 0j

    def dual(self) -> "HeunParams":
        """Parameter set whose J integral builds K2 of this one. The map is an involution."""
        a, b, g, d = self.alpha, self.beta, self.gamma, self.delta
        return HeunParams(
            alpha=(a + g) / 2,
            beta=b,
            gamma=(3 * a - g) / 2,
            delta=d + b * (g - a) / 2,
        )

    def conjugate(self) -> "HeunParams":
        return HeunParams(
            alpha=self.alpha.conjugate(),
            beta=self.beta.conjugate(),
            gamma=self.gamma.conjugate(),
            delta=self.delta.conjugate(),
        )

    @property
    def is_real(self) -> bool:
        return all(v.imag == 0 for v in (self.alpha, self.beta, self.gamma, self.delta))

    @property
    def c1(self) -> complex:
        """Constant term magnitude 1/2 [delta + beta (1+alpha)] of the equation"""
        return 0.5 * (self.delta + self.beta * (1 + self.alpha))


class SeriesControl(BaseModel):
    model_config = ConfigDict(frozen=True)

    rel_tol: float = Field(default=1e-14, gt=0, description="Term to partial-sum ratio")
    max_terms: int = Field(default=10_000, ge=16)
    consecutive_small: int = Field(default=3, ge=2)


class QuadratureControl(BaseModel):
    model_config = ConfigDict(frozen=True)

    abs_tol: float = Field(default=1e-13, gt=0)
    rel_tol: float = Field(default=1e-10, gt=0)
    max_levels: int = Field(default=8, ge=1, description="Level doublings of the tanh-sinh rule")
    tail_cutoff: float = Field(default=12.0, ge=10, description="Upper integration limit X")


class PowerTerm(BaseModel):
    """coeff * r**power, with the literal power stored"""

    model_config = ConfigDict(frozen=True)

    coeff: complex
    power: float


PotentialKind = Literal["polynomial", "exponential", "logsquared"]


class PotentialSpec(BaseModel):
    """A central potential: power terms, xi*exp(sigma r), or eta/(r ln(alpha r))**2"""

    model_config = ConfigDict(frozen=True)

    kind: PotentialKind = "polynomial"
    terms: Tuple[PowerTerm, ...] = ()
    xi: Optional[float] = None
    sigma: Optional[float] = None
    eta: Optional[float] = None
    alpha_scale: Optional[float] = None
    dimension: int = Field(default=3, ge=1)

    @model_validator(mode="after")
    def check_kind(self) -> "PotentialSpec":
        if self.kind == "polynomial":
            powers = [t.power for t in self.terms]
            if len(set(powers)) != len(powers):
                raise ValueError(f"Polynomial exponents must be distinct: {powers}")
        elif self.kind == "exponential":
            if self.xi is None or self.sigma is None:
                raise ValueError("Exponential potential needs xi and sigma")
            if self.sigma <= 0:
                raise ValueError(f"Exponential potential needs sigma > 0, got {self.sigma}")
        else:
            if self.eta is None or self.alpha_scale is None:
                raise ValueError("LogSquared potential needs eta and alpha_scale")
            if self.alpha_scale <= 0:
                raise ValueError(f"LogSquared potential needs alpha_scale > 0, got {self.alpha_scale}")
        return self

    @classmethod
    def polynomial(cls, terms, dimension: int = 3) -> "PotentialSpec":
        """Build from (coeff, power) pairs"""
        return cls(
            kind="polynomial",
            terms=tuple(PowerTerm(coeff=c, power=p) for c, p in terms),
            dimension=dimension,
        )

    @classmethod
    def exponential(cls, xi: float, sigma: float) -> "PotentialSpec":
        return cls(kind="exponential", xi=xi, sigma=sigma)

    @classmethod
    def log_squared(cls, eta: float, alpha_scale: float) -> "PotentialSpec":
        return cls(kind="logsquared", eta=eta, alpha_scale=alpha_scale)

    @property
    def powers(self) -> List[float]:
        return [t.power for t in self.terms]

    @property
    def is_real(self) -> bool:
        return all(t.coeff.imag == 0 for t in self.terms)

    def with_dimension(self, dimension: int) -> "PotentialSpec":
        return self.model_copy(update={"dimension": dimension})

    def evaluate(self, r):
        """U(r) for scalar or array r"""
        r = np.asarray(r, dtype=float)
        if self.kind == "exponential":
            return self.xi * np.exp(self.sigma * r)
        if self.kind == "logsquared":
            return self.eta / (r * np.log(self.alpha_scale * r)) ** 2
        total = np.zeros_like(r, dtype=complex if not self.is_real else float)
        for t in self.terms:
            coeff = t.coeff if not self.is_real else t.coeff.real
            total = total + coeff * r**t.power
        return total

    def describe(self) -> str:
        if self.kind == "exponential":
            return f"{self.xi:g}*exp({self.sigma:g} r)"
        if self.kind == "logsquared":
            return f"{self.eta:g}/(r ln({self.alpha_scale:g} r))^2"
        if not self.terms:
            return "0"
        parts = []
        for t in self.terms:
            c = t.coeff.real if t.coeff.imag == 0 else t.coeff
            parts.append(f"{c:g}*r^{t.power:g}")
        return " + ".join(parts)


class RadialState(BaseModel):
    model_config = ConfigDict(frozen=True)

    dimension: int = Field(default=3, ge=1)
    l: float = 0.0
    n_r: int = Field(default=0, ge=0)
    E: float
    is_dual_image: bool = False

    @property
    def effective_l(self) -> float:
        """L with centrifugal term L(L+1)/r^2 in the reduced radial equation"""
        return self.l + (self.dimension - 3) / 2


class DualityMap(BaseModel):
    """Power-law duality transform between two polynomial potentials"""

    model_config = ConfigDict(frozen=True)

    coord_exponent: float = Field(..., description="s in rho = r**s, equal to (a+3)/2")
    energy_coupling_factor: float = Field(..., gt=0, description="(2/(A+3))**2, 1 for classical maps")
    angular_scale: float = Field(..., description="(l + n/2 - 1) -> angular_scale * (l + n/2 - 1)")
    wavefn_prefactor_exponent: float = Field(..., description="(A+1)/4 in u = rho**((A+1)/4) v")
    pivot_index: int
    dims: Tuple[int, int] = (3, 3)
    quantum: bool = True

    @property
    def pivot_power(self) -> float:
        """Literal power a+1 of the pivot term"""
        return 2 * self.coord_exponent - 2

    @property
    def dual_pivot_power(self) -> float:
        return 2 / self.coord_exponent - 2

    def inverse(self, pivot_index: int) -> "DualityMap":
        """The map leading back, given the index of the pivot in the dual potential"""
        s = self.coord_exponent
        return DualityMap(
            coord_exponent=1.0 / s,
            energy_coupling_factor=1.0 / s**2 if self.quantum else 1.0,
            angular_scale=1.0 / self.angular_scale,
            wavefn_prefactor_exponent=self.pivot_power / 4,
            pivot_index=pivot_index,
            dims=(self.dims[1], self.dims[0]),
            quantum=self.quantum,
        )


class ExpLogMap(BaseModel):
    """Exponential <-> inverse-square-log duality transform"""

    model_config = ConfigDict(frozen=True)

    direction: Literal["exp_to_log", "log_to_exp"]
    sigma: float = Field(..., gt=0)
    alpha_scale: float = Field(..., gt=0)


class ClassicalMap(BaseModel):
    """Orbit-plane map (r, theta) -> (r**s, s*theta) plus the dual energy"""

    model_config = ConfigDict(frozen=True)

    coord_exponent: float
    pivot_index: int
    dual_energy: float
    L: float
    duality: DualityMap


class EnergyRole(str, Enum):
    AS_Z2_COEFFICIENT = "AsZ2Coefficient"
    AS_BETA = "AsBeta"
    AS_GAMMA = "AsGamma"
    AS_DELTA = "AsDelta"


class Peel(BaseModel):
    """Factors peeled from u: exp(-gauss_coeff z^2 - linear_coeff z) z**power_s"""

    model_config = ConfigDict(frozen=True)

    gauss_coeff: complex = 0.5
    linear_coeff: complex
    power_s: complex


class HeunReduction(BaseModel):
    model_config = ConfigDict(frozen=True)

    p: float
    c: complex
    peel: Peel
    heun: HeunParams
    energy_role: EnergyRole
    effective_l: float
    energy: float = Field(..., description="Energy after absorbing constant potential terms")


class SpectrumRequest(BaseModel):
    model_config = ConfigDict(frozen=True)

    potential: PotentialSpec
    l: float = 0.0
    energy_window: Tuple[float, float]
    max_states: int = Field(default=10, ge=1)
    scan_points: int = Field(default=128, ge=64)

    @field_validator("energy_window")
    @classmethod
    def check_window(cls, v):
        if not v[0] < v[1]:
            raise ValueError(f"energy_window must satisfy E_lo < E_hi, got {v}")
        return v


class BoundState(BaseModel):
    model_config = ConfigDict(frozen=True)

    E: float
    n_r: int
    k2_residual: float
    nodes: Optional[int] = None
    at_window_edge: bool = False


class RadialGrid(BaseModel):
    model_config = ConfigDict(frozen=True)

    r_min: float = Field(default=1e-4, gt=0)
    r_max: float = Field(default=40.0, gt=0)
    n_points: int = Field(default=4000, ge=200)

    @model_validator(mode="after")
    def check_bounds(self) -> "RadialGrid":
        if not self.r_min < self.r_max:
            raise ValueError(f"RadialGrid needs r_min < r_max, got {self.r_min}, {self.r_max}")
        return self

    @property
    def h(self) -> float:
        return (self.r_max - self.r_min) / (self.n_points - 1)

    def radii(self) -> np.ndarray:
        return np.linspace(self.r_min, self.r_max, self.n_points)


class OrbitSample(BaseModel):
    model_config = ConfigDict(frozen=True)

    points: List[Tuple[float, float]]
    E: float
    L: float
    r_turn_lo: float
    r_turn_hi: float
    apsidal_angle: float

    @field_validator("points")
    @classmethod
    def check_monotone(cls, v):
        thetas = [t for _, t in v]
        if any(b < a for a, b in zip(thetas, thetas[1:])):
            raise ValueError("Orbit theta samples must be monotone")
        return v


class FDEigenvalue(BaseModel):
    model_config = ConfigDict(frozen=True)

    E: float
    error_estimate: float


# Command responses. calculated_at is excluded from serialised output so runs stay byte-identical.


class ResponseBase(BaseModel):
    success: bool = True
    schema_tag: str = Field(default=SCHEMA_TAG, alias="schema")
    calculated_at: datetime = Field(default_factory=datetime.now, exclude=True)
    version: str = Field(default="1.0")

    model_config = ConfigDict(populate_by_name=True)


class DualSetMember(BaseModel):
    potential: PotentialSpec
    state: RadialState
    pivot_index: Optional[int] = Field(None, description="Term of the input traded with the energy")
    duality_map: Optional[DualityMap] = None
    relations: Dict[str, float] = Field(default_factory=dict)
    heun_reducible: bool = True


class DualSetResponse(ResponseBase):
    input_potential: PotentialSpec
    members: List[DualSetMember]
    pairwise_dual: bool
    warnings: List[str] = Field(default_factory=list)


class ExpLogResponse(ResponseBase):
    input_potential: PotentialSpec
    input_state: RadialState
    dual_potential: PotentialSpec
    dual_state: RadialState
    duality_map: ExpLogMap
    swapped: Dict[str, float] = Field(..., description="Angular momentum <-> coupling swap")


class SpectrumRow(BaseModel):
    l: float
    n_r: int
    E_K2: float
    E_oracle: Optional[float]
    rel_diff: Optional[float]
    k2_residual: float
    at_window_edge: bool = False


class SpectrumResponse(ResponseBase):
    potential: PotentialSpec
    l_values: List[float]
    rows: List[SpectrumRow]
    tolerance: float


class CheckResult(BaseModel):
    name: str
    value: float
    tolerance: float
    passed: bool
    detail: str = ""


class VerifyResponse(ResponseBase):
    checks: List[CheckResult]
    passed: int
    failed: int


class OrbitResponse(ResponseBase):
    potential: PotentialSpec
    dual_potential: PotentialSpec
    orbit: OrbitSample
    dual_points: List[Tuple[float, float]]
    apsidal_angle: float
    dual_apsidal_angle: float
    max_residual: float


class HeunResponse(ResponseBase):
    kind: Literal["regular", "B", "H", "K2", "K1"]
    params: HeunParams
    z: Optional[complex] = None
    value: complex
    conditioning: Optional[float] = None


class PhaseRow(BaseModel):
    k: float
    delta_K2: float
    delta_oracle: Optional[float]
    abs_diff: Optional[float]


class PhaseResponse(ResponseBase):
    potential: PotentialSpec
    l: int
    rows: List[PhaseRow]
    tolerance: float


class RunConfig(BaseModel):
    """Resolved CLI configuration for one command"""

    command: Literal["dualize", "spectrum", "verify", "orbit", "heun", "phase"]
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    format: Literal["json", "csv"] = "json"
    series: SeriesControl = Field(default_factory=SeriesControl)
    quadrature: QuadratureControl = Field(default_factory=QuadratureControl)
    grid_points: int = Field(default=4000, ge=200)
    r_max: Optional[float] = Field(default=None, gt=0)


def phase_distance(a: float, b: float) -> float:
    """Distance between two phases taken modulo pi"""
    d = math.remainder(a - b, math.pi)
    return abs(d)
