import logging
import sys
from typing import List, Optional

import click
import typer
from dotenv import load_dotenv
from pydantic import ValidationError

from misc.config import load_settings
from misc.constants import LOGGER_NAME
from misc.exceptions import RideError

# Load environment variables
load_dotenv()

# Configure logging
settings = load_settings()
logging.basicConfig(
    level=settings.log_level,
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
)
logger = logging.getLogger(f"{LOGGER_NAME}.cli")

# Import commands
from commands.deadleaves import deadleaves
from commands.evaluate import evaluate
from commands.inpaint import inpaint
from commands.sample import sample
from commands.train import train

app = typer.Typer(
    name="ride",
    help="Recurrent image density estimation: data generation, training, evaluation, sampling and inpainting.",
    add_completion=False,
    pretty_exceptions_enable=False,
)

# Register commands
app.command("deadleaves")(deadleaves)
app.command("train")(train)
app.command("eval")(evaluate)
app.command("sample")(sample)
app.command("inpaint")(inpaint)


def dispatch(argv: Optional[List[str]] = None) -> int:
    """
    Run one subcommand and map the outcome onto an exit status.

    Returns:
        0 on success, 1 on usage errors, 2 on data or model errors
    """
    command = typer.main.get_command(app)
    try:
        result = command.main(args=argv, prog_name="ride", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return 1
    except click.exceptions.Abort:
        return 1
    except (RideError, OSError, ValidationError) as e:
        logger.error(f"{type(e).__name__}: {e}")
        click.echo(f"Error: {e}", err=True)
        return 2
    return result if isinstance(result, int) else 0


if __name__ == "__main__":
    sys.exit(dispatch())
