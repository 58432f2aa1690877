"""
Helpers shared by the subcommands.
"""

import logging
from pathlib import Path
from typing import List, Optional

import numpy as np
import typer

from imaging.image import Image, dequantize, load_image, quantize, save_image_file
from misc.constants import LOGGER_NAME, FileMagic
from misc.exceptions import DomainError

logger = logging.getLogger(f"{LOGGER_NAME}.cli")

IMAGE_SUFFIXES = (".fgrd", ".pgm")

# Stream identifiers keep the random draws of different purposes apart
DEQUANTIZE_STREAM = 1
MODEL_STREAM = 2


def load_image_input(path: Path, seed: Optional[int], index: int = 0) -> Image:
    """
    Load one image; 8-bit PGMs are dequantized to [0, 1) with the stream
    [seed, DEQUANTIZE_STREAM, index].
    """
    data = path.read_bytes()
    image = load_image(data)
    if not data.startswith(FileMagic.PGM):
        return image
    if seed is None:
        raise typer.BadParameter(f"--seed is required to dequantize the PGM input {path}")
    return dequantize(image, np.random.default_rng([seed, DEQUANTIZE_STREAM, index]))


def load_dataset(directory: Path, seed: Optional[int]) -> List[Image]:
    """All FGRD and PGM images of a directory, in file-name order."""
    if not directory.is_dir():
        raise DomainError(f"{directory} is not a directory")
    paths = sorted(p for p in directory.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
    if not paths:
        raise DomainError(f"No .fgrd or .pgm images in {directory}")
    images = [load_image_input(path, seed, index) for index, path in enumerate(paths)]
    logger.info(f"Loaded {len(images)} images from {directory}")
    return images


def save_output_image(path: Path, image: Image) -> None:
    """Write FGRD as is; quantize first when writing a PGM."""
    if path.suffix.lower() == ".pgm":
        image = quantize(image)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_image_file(path, image)
