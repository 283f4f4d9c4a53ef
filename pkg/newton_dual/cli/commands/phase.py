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
from newton_dual.cli.dependencies import get_phase_service


def phase(
    source: InputArg = None,
    series_tol: SeriesTol = SERIES_TOL,
    quad_tol: QuadTol = QUAD_TOL,
    grid_points: GridPoints = GRID_POINTS,
    rmax: RMax = None,
    out: Out = None,
    fmt: Format = FORMAT_DEFAULT,
) -> None:
    """
    Phase shifts over a k-grid from K2, with a radial-integration cross-check.

    Input: potential, integer l, k (a list or {start, stop, num}) and optional tolerance.
    Exits with 4 when a phase difference exceeds the tolerance.
    """
    execute("phase", get_phase_service(), source, series_tol, quad_tol, grid_points, rmax, out, fmt)
