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
from newton_dual.cli.dependencies import get_spectrum_service


def spectrum(
    source: InputArg = None,
    series_tol: SeriesTol = SERIES_TOL,
    quad_tol: QuadTol = QUAD_TOL,
    grid_points: GridPoints = GRID_POINTS,
    rmax: RMax = None,
    out: Out = None,
    fmt: Format = FORMAT_DEFAULT,
) -> None:
    """
    Bound states from the zeros of K2, with a finite-difference cross-check.

    Input: potential, l (a number or a list), energy_window, optional max_states,
    scan_points and tolerance. Exits with 4 when a relative difference exceeds the tolerance.
    """
    execute("spectrum", get_spectrum_service(), source, series_tol, quad_tol, grid_points, rmax, out, fmt)
