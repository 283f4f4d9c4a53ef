import asyncio
from enum import Enum
from typing import Annotated, Optional

import typer
from loguru import logger

from newton_dual.exceptions import NewtonDualError
from newton_dual.middleware.input_guard import load_payload, max_grid_points
from newton_dual.reporting.writers import write_output
from newton_dual.schemas.schemas import QuadratureControl, RunConfig, SeriesControl
from newton_dual.services.jobs import ComputationStrategy, outcome_error


class OutputFormat(str, Enum):
    json = "json"
    csv = "csv"


InputArg = Annotated[
    Optional[str], typer.Argument(help="Input JSON file, or an inline JSON object", show_default=False)
]
SeriesTol = Annotated[
    float, typer.Option("--series-tol", min=1e-17, help="Series truncation: term / partial sum ratio")
]
QuadTol = Annotated[float, typer.Option("--quad-tol", min=1e-17, help="Relative tolerance of the K2 quadrature")]
GridPoints = Annotated[
    int, typer.Option("--grid-points", min=200, max=max_grid_points, help="Finite-difference grid points")
]
RMax = Annotated[Optional[float], typer.Option("--rmax", min=0.0, help="Outer radius of the oracle grid")]
Out = Annotated[Optional[str], typer.Option("--out", help="Output file; stdout when omitted")]
Format = Annotated[OutputFormat, typer.Option("--format", help="Output format")]

SERIES_TOL = SeriesControl().rel_tol
QUAD_TOL = QuadratureControl().rel_tol
GRID_POINTS = 4000
FORMAT_DEFAULT = OutputFormat.json


def execute(
    command: str,
    strategy: ComputationStrategy,
    source: Optional[str],
    series_tol: float,
    quad_tol: float,
    grid_points: int,
    rmax: Optional[float],
    out: Optional[str],
    fmt: OutputFormat,
) -> None:
    """Run one command and exit with the code of its error category"""
    try:
        config = RunConfig(
            command=command,
            input_path=source,
            output_path=out,
            format=fmt.value,
            series=SeriesControl(rel_tol=series_tol),
            quadrature=QuadratureControl(rel_tol=quad_tol),
            grid_points=grid_points,
            r_max=rmax,
        )
        payload = load_payload(source)
        response = asyncio.run(strategy.run(payload, config))
        logger.debug(response)
        write_output(response, config.format, config.output_path)
        error = outcome_error(response)
        if error is not None:
            raise error
    except NewtonDualError as e:
        logger.error(f"{command} failed with {type(e).__name__}: {str(e)}")
        raise typer.Exit(code=e.exit_code)
    except ValueError as e:
        logger.error(f"{command} rejected its input: {str(e)}")
        raise typer.Exit(code=2)
    except Exception as e:
        logger.exception(f"Unexpected error in {command}: {str(e)}")
        raise typer.Exit(code=5)
