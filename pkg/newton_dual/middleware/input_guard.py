import json
import math
from pathlib import Path
from typing import Any, Dict, Optional

from loguru import logger
from pydantic import ValidationError

from newton_dual.exceptions import InputError
from newton_dual.schemas.schemas import HeunParams, PotentialSpec, RadialState

max_input_bytes = 64 * 1024
max_terms = 8
max_grid_points = 200_000
allowed_kinds = {"polynomial", "exponential", "logsquared"}


def validate_parameter(param_name: str, param_value: Any) -> bool:
    """Validate a scalar input parameter"""
    if isinstance(param_value, bool) or not isinstance(param_value, (int, float)):
        logger.warning(f"Invalid parameter {param_name}: {param_value!r} is not a number")
        return False
    if not math.isfinite(param_value):
        logger.warning(f"Invalid parameter {param_name}: {param_value!r} is not finite")
        return False
    return True


def complex_value(param_name: str, value: Any) -> complex:
    """A number, a {"re", "im"} object or a Python complex literal such as "1-2j" """
    if isinstance(value, dict):
        if set(value) - {"re", "im"}:
            raise InputError(f"{param_name}: complex objects take only 're' and 'im'")
        parts = [value.get("re", 0.0), value.get("im", 0.0)]
        if not all(validate_parameter(param_name, p) for p in parts):
            raise InputError(f"{param_name}: invalid complex value {value!r}")
        return complex(parts[0], parts[1])
    if isinstance(value, str):
        try:
            return complex(value.replace(" ", ""))
        except ValueError:
            raise InputError(f"{param_name}: cannot parse {value!r} as a complex number")
    if not validate_parameter(param_name, value):
        raise InputError(f"{param_name}: invalid value {value!r}")
    return complex(value)


def real_value(payload: Dict[str, Any], name: str, default: Optional[float] = None) -> float:
    value = payload.get(name, default)
    if value is None:
        raise InputError(f"Missing required field '{name}'")
    if not validate_parameter(name, value):
        raise InputError(f"Field '{name}' must be a finite number, got {value!r}")
    return float(value)


def load_payload(source: Optional[str]) -> Dict[str, Any]:
    """Read a JSON object from a file path or an inline JSON string"""
    if source is None:
        return {}
    text = source
    if not source.lstrip().startswith("{"):
        path = Path(source)
        if not path.is_file():
            raise InputError(f"Input file not found: {source}")
        if path.stat().st_size > max_input_bytes:
            raise InputError(f"Input file {source} exceeds {max_input_bytes} bytes")
        text = path.read_text()
    if len(text.encode()) > max_input_bytes:
        raise InputError(f"Inline input exceeds {max_input_bytes} bytes")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputError(f"Invalid JSON input: {e.msg} (line {e.lineno}, column {e.colno})")
    if not isinstance(data, dict):
        raise InputError("Input must be a JSON object")
    return data


def parse_potential(payload: Dict[str, Any]) -> PotentialSpec:
    """PotentialSpec from a payload, either bare or under 'potential'"""
    data = payload.get("potential", payload if "kind" in payload or "terms" in payload else None)
    if not isinstance(data, dict):
        raise InputError("Input needs a 'potential' object")
    kind = data.get("kind", "polynomial")
    if kind not in allowed_kinds:
        logger.warning(f"Rejected potential kind: {kind!r}")
        raise InputError(f"Unknown potential kind {kind!r}; expected one of {sorted(allowed_kinds)}")
    data = dict(data, kind=kind)
    if kind == "polynomial":
        terms = data.get("terms")
        if not isinstance(terms, list) or not terms:
            raise InputError("Polynomial potentials need a non-empty 'terms' list")
        if len(terms) > max_terms:
            raise InputError(f"At most {max_terms} terms are accepted, got {len(terms)}")
        parsed = []
        for i, term in enumerate(terms):
            if not isinstance(term, dict) or "coeff" not in term or "power" not in term:
                raise InputError(f"Term {i} needs 'coeff' and 'power'")
            power = term["power"]
            if not validate_parameter(f"terms[{i}].power", power):
                raise InputError(f"Term {i} has an invalid power {power!r}")
            parsed.append({"coeff": complex_value(f"terms[{i}].coeff", term["coeff"]), "power": float(power)})
        data["terms"] = parsed
    try:
        return PotentialSpec.model_validate(data)
    except ValidationError as e:
        raise InputError(f"Invalid potential: {e.errors()[0]['msg']}")


def parse_state(payload: Dict[str, Any], potential: PotentialSpec, default_energy: Optional[float] = None) -> RadialState:
    data = payload.get("state", {})
    if not isinstance(data, dict):
        raise InputError("'state' must be an object")
    energy = data.get("E", default_energy)
    if energy is None:
        raise InputError("The state needs an energy 'E'")
    try:
        return RadialState(
            dimension=data.get("dimension", potential.dimension),
            l=real_value(data, "l", 0.0),
            n_r=data.get("n_r", 0),
            E=real_value({"E": energy}, "E"),
        )
    except ValidationError as e:
        raise InputError(f"Invalid state: {e.errors()[0]['msg']}")


def parse_heun_params(payload: Dict[str, Any]) -> HeunParams:
    data = payload.get("params")
    if not isinstance(data, dict) or "alpha" not in data:
        raise InputError("Heun input needs 'params' with at least 'alpha'")
    return HeunParams(**{k: complex_value(k, data.get(k, 0.0)) for k in ("alpha", "beta", "gamma", "delta")})
