import logging
from pathlib import Path

import numpy as np
import typer

from commands.common import MODEL_STREAM, save_output_image
from misc.constants import LOGGER_NAME
from models.container import load_model_file
from sampling.ancestral import ancestral_sample

logger = logging.getLogger(f"{LOGGER_NAME}.cli")


def sample(
    model: Path = typer.Option(..., "--model", help="Model container"),
    height: int = typer.Option(..., "--height", min=1, help="Image height"),
    width: int = typer.Option(..., "--width", min=1, help="Image width"),
    seed: int = typer.Option(..., "--seed", help="Random seed"),
    out: Path = typer.Option(..., "--out", help="Output image (.pgm is quantized, anything else FGRD)"),
):
    """Draw an image from a model by ancestral sampling (one sequential chain)."""
    ride = load_model_file(model)
    image = ancestral_sample(ride, height, width, np.random.default_rng([seed, MODEL_STREAM]))
    save_output_image(out, image)
    logger.info(f"Wrote a {height}x{width} sample to {out}")
