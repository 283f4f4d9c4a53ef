from newton_dual.cli.commands.common import (
    FORMAT_DEFAULT,
    GRID_POINTS,
    QUAD_TOL,
    SERIES_TOL,
    Format,
    GridPoints,
    InputArg,
    Out,
    QuadTol,
    RMax,
    SeriesTol,
    execute,
)
from newton_dual.cli.dependencies import get_heun_service


def heun(
    source: InputArg = None,
    series_tol: SeriesTol = SERIES_TOL,
    quad_tol: QuadTol = QUAD_TOL,
    grid_points: GridPoints = GRID_POINTS,
    rmax: RMax = None,
    out: Out = None,
    fmt: Format = FORMAT_DEFAULT,
) -> None:
    """
    A single Heun value: regular, B, H, K2 or K1.

    Input: kind, params {alpha, beta, gamma, delta}, z and optional n_terms.
    """
    execute("heun", get_heun_service(), source, series_tol, quad_tol, grid_points, rmax, out, fmt)
