import os
import sys

import typer
from loguru import logger

from newton_dual.cli.commands import dualize, heun, orbit, phase, spectrum, verify

logger.remove()
logger.add(
    sys.stderr,
    level=os.environ.get("NEWTON_DUAL_LOG_LEVEL", "INFO"),
    format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan> - <level>{message}</level>",
    colorize=True,
)

app = typer.Typer(
    name="newton-dual",
    help="Newton duality between central potentials, Heun connection coefficients, spectra and phase shifts",
    add_completion=False,
    no_args_is_help=True,
)

app.command("dualize")(dualize.dualize)
app.command("spectrum")(spectrum.spectrum)
app.command("verify")(verify.verify)
app.command("orbit")(orbit.orbit)
app.command("heun")(heun.heun)
app.command("phase")(phase.phase)


if __name__ == "__main__":
    app()
