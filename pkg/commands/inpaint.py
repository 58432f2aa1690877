import logging
from pathlib import Path
from typing import Optional

import numpy as np
import typer

from commands.common import MODEL_STREAM, load_image_input, save_output_image
from imaging.image import Image, load_image_file
from misc.config import CliConfig, parse_config_file
from misc.constants import LOGGER_NAME
from models.container import load_model_file
from sampling.inpainting import inpaint_with_stats

logger = logging.getLogger(f"{LOGGER_NAME}.cli")


def inpaint(
    model: Path = typer.Option(..., "--model", help="Model container"),
    image: Path = typer.Option(..., "--image", help="Image with the pixels to keep"),
    mask: Path = typer.Option(..., "--mask", help="Mask image; nonzero marks missing pixels"),
    seed: int = typer.Option(..., "--seed", help="Random seed"),
    out: Path = typer.Option(..., "--out", help="Output image"),
    sweeps: Optional[int] = typer.Option(None, "--sweeps", min=1, help="Gibbs sweeps [default: 100]"),
    config: Optional[Path] = typer.Option(None, "--config", help="Config file (key = value per line)"),
    threads: int = typer.Option(1, "--threads", min=1, envvar="RIDE_THREADS", help="Worker threads"),
):
    """Fill in the masked pixels of an image with Metropolis-within-Gibbs sampling."""
    cfg = (parse_config_file(config) if config else CliConfig()).inpaint()
    if sweeps is not None:
        cfg = cfg.model_copy(update={"sweeps": sweeps})
    ride = load_model_file(model)
    observed = load_image_input(image, seed)
    missing = Image(values=(load_image_file(mask).values != 0).astype(np.float64))
    result, rates = inpaint_with_stats(
        ride, observed, missing, cfg, np.random.default_rng([seed, MODEL_STREAM]), threads=threads,
    )
    save_output_image(out, result)
    logger.info(f"Wrote inpainted image to {out} (final acceptance rate {rates[-1] if rates else 1.0:.3f})")
