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
from newton_dual.cli.dependencies import get_orbit_service


def orbit(
    source: InputArg = None,
    series_tol: SeriesTol = SERIES_TOL,
    quad_tol: QuadTol = QUAD_TOL,
    grid_points: GridPoints = GRID_POINTS,
    rmax: RMax = None,
    out: Out = None,
    fmt: Format = FORMAT_DEFAULT,
) -> None:
    """
    Classical orbit between its turning points and its classical dual image.

    Input: potential, E, L and optional pivot, n_steps, direction, r_start.
    """
    execute("orbit", get_orbit_service(), source, series_tol, quad_tol, grid_points, rmax, out, fmt)
