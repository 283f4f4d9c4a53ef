"""Serialise command responses.

JSON is written with fixed key order and every float at 17 significant digits, so
identical runs give byte-identical output. Complex numbers become {"re": .., "im": ..}.
"""

import json
import math
import sys
from pathlib import Path
from typing import Any, Optional

import pandas as pd
from pydantic import BaseModel

from newton_dual.schemas.schemas import (
    DualSetResponse,
    ExpLogResponse,
    HeunResponse,
    OrbitResponse,
    PhaseResponse,
    SpectrumResponse,
    VerifyResponse,
)

FLOAT_FORMAT = "%.17g"


def _float(value: float) -> str:
    if not math.isfinite(value):
        return "null"
    text = format(value, ".17g")
    if "e" not in text and "." not in text and "inf" not in text:
        text += ".0"
    return text


def _encode(obj: Any, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    close = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, complex):
        return _encode({"re": obj.real, "im": obj.imag}, indent, level)
    if isinstance(obj, float):
        return _float(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + close + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + close + "]"
    if hasattr(obj, "value"):
        return _encode(obj.value, indent, level)
    raise TypeError(f"Cannot serialise {type(obj).__name__}")


def to_json(response: BaseModel, indent: int = 2) -> str:
    data = response.model_dump(mode="python", by_alias=True)
    return _encode(data, indent, 0) + "\n"


def _complex_columns(frame: pd.DataFrame) -> pd.DataFrame:
    for column in list(frame.columns):
        if frame[column].map(lambda v: isinstance(v, complex)).any():
            frame.insert(frame.columns.get_loc(column) + 1, f"{column}_im", frame[column].map(lambda v: complex(v).imag))
            frame[column] = frame[column].map(lambda v: complex(v).real)
            frame = frame.rename(columns={column: f"{column}_re"})
    return frame


def response_table(response: BaseModel) -> pd.DataFrame:
    """The CSV table of a command response; columns are fixed per response type"""
    if isinstance(response, SpectrumResponse):
        frame = pd.DataFrame(
            [row.model_dump() for row in response.rows],
            columns=["l", "n_r", "E_K2", "E_oracle", "rel_diff", "k2_residual", "at_window_edge"],
        )
    elif isinstance(response, PhaseResponse):
        frame = pd.DataFrame([row.model_dump() for row in response.rows], columns=["k", "delta_K2", "delta_oracle", "abs_diff"])
    elif isinstance(response, VerifyResponse):
        frame = pd.DataFrame([c.model_dump() for c in response.checks], columns=["name", "value", "tolerance", "passed", "detail"])
    elif isinstance(response, OrbitResponse):
        orbit = pd.DataFrame(response.orbit.points, columns=["radius", "angle"])
        orbit.insert(0, "series", "orbit")
        dual = pd.DataFrame(response.dual_points, columns=["radius", "angle"])
        dual.insert(0, "series", "dual")
        frame = pd.concat([orbit, dual], ignore_index=True)
    elif isinstance(response, DualSetResponse):
        frame = pd.DataFrame(
            [
                {
                    "member": i,
                    "pivot_index": m.pivot_index if m.pivot_index is not None else -1,
                    "potential": m.potential.describe(),
                    "E": m.state.E,
                    "l": m.state.l,
                    "coord_exponent": m.duality_map.coord_exponent if m.duality_map else 1.0,
                    "heun_reducible": m.heun_reducible,
                }
                for i, m in enumerate(response.members)
            ]
        )
    elif isinstance(response, ExpLogResponse):
        frame = pd.DataFrame(
            [
                {"side": "input", "potential": response.input_potential.describe(), "E": response.input_state.E, "l": response.input_state.l},
                {"side": "dual", "potential": response.dual_potential.describe(), "E": response.dual_state.E, "l": response.dual_state.l},
            ]
        )
    elif isinstance(response, HeunResponse):
        frame = pd.DataFrame(
            [{"kind": response.kind, "z": response.z, "value": response.value, "conditioning": response.conditioning}]
        )
    else:
        raise TypeError(f"No CSV layout for {type(response).__name__}")
    return _complex_columns(frame)


def to_csv(response: BaseModel) -> str:
    return response_table(response).to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def write_output(response: BaseModel, fmt: str = "json", path: Optional[str] = None) -> None:
    """Write a response as JSON or CSV to a file, or to stdout when no path is given"""
    text = to_json(response) if fmt == "json" else to_csv(response)
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()
