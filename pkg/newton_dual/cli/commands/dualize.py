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
from newton_dual.cli.dependencies import get_dualize_service


def dualize(
    source: InputArg = None,
    series_tol: SeriesTol = SERIES_TOL,
    quad_tol: QuadTol = QUAD_TOL,
    grid_points: GridPoints = GRID_POINTS,
    rmax: RMax = None,
    out: Out = None,
    fmt: Format = FORMAT_DEFAULT,
) -> None:
    """
    Dual set of a polynomial potential, or the exponential <-> log-squared image.

    Writes every member with its state, duality map and coefficient relations.
    Exits with 3 when some member is not reducible to Heun form (the set is still written).
    """
    execute("dualize", get_dualize_service(), source, series_tol, quad_tol, grid_points, rmax, out, fmt)
