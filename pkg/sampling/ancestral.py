"""
Ancestral sampling: pixels are drawn one at a time in raster order from the
model's conditional given everything generated so far.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from imaging.image import Image
from misc.constants import LOGGER_NAME
from misc.exceptions import DomainError
from models.mcgsm import log_density, sample
from models.ride import RideModel
from models.slstm import slstm_step
from models.whitening import precondition, unprecondition

logger = logging.getLogger(f"{LOGGER_NAME}.sampling")


def fill_ancestrally(
    model: RideModel,
    values: np.ndarray,
    missing: np.ndarray,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, float]:
    """
    Resample the missing pixels of a grid in raster order.

    The grid is treated as a standalone image (zero outside). Hidden states
    are computed cell by cell, so every missing pixel is drawn from the exact
    conditional the model assigns it given the pixels before it.

    Args:
        model: The model
        values: Pixel grid (H, W); entries at missing pixels are ignored
        missing: Boolean grid (H, W) of pixels to draw
        rng: Random generator

    Returns:
        (filled grid, log-density in nats of the drawn pixels under the
        conditionals they were drawn from)
    """
    values = np.array(values, dtype=np.float64)
    missing = np.asarray(missing, dtype=bool)
    if values.ndim != 2 or missing.shape != values.shape:
        raise DomainError(f"Expected matching 2-D grids, got {values.shape} and {missing.shape}")
    if not missing.any():
        return values, 0.0

    height, width = values.shape
    spec = model.neighborhood
    top, side = spec.rows_above, spec.half_width
    # Zero padding above and to both sides, missing pixels start at zero
    padded = np.zeros((height + top, width + 2 * side))
    padded[top:, side:side + width] = np.where(missing, 0.0, values)
    d_rows = np.array([di for di, _ in spec.offsets])
    d_cols = np.array([dj for _, dj in spec.offsets])

    hidden = [np.zeros((height, width, layer.hidden_dim)) for layer in model.layers]
    memory = [np.zeros((height, width, layer.hidden_dim)) for layer in model.layers]
    last = np.flatnonzero(missing)[-1]
    log_q = 0.0

    for index in range(last + 1):
        i, j = divmod(index, width)
        ctx = padded[top + i + d_rows, side + j + d_cols]
        ctx_hat, _ = precondition(model.whitening, ctx)
        # Advance every layer by one cell
        x = ctx_hat[None]
        for k, layer in enumerate(model.layers):
            zero = np.zeros((1, layer.hidden_dim))
            h_left, c_left = (hidden[k][i, j - 1][None], memory[k][i, j - 1][None]) if j > 0 else (zero, zero)
            h_up, c_up = (hidden[k][i - 1, j][None], memory[k][i - 1, j][None]) if i > 0 else (zero, zero)
            h, c, _ = slstm_step(layer, x, h_left, h_up, c_left, c_up)
            hidden[k][i, j], memory[k][i, j] = h[0], c[0]
            x = h
        if not missing[i, j]:
            continue
        # Draw in whitened space and map back
        head_input = np.concatenate([x[0], ctx_hat])[None] if model.layers else ctx_hat[None]
        y_hat = sample(model.head, head_input, rng)
        log_q += float(log_density(model.head, head_input, y_hat)[0]) + model.whitening.log_jacobian
        y = float(unprecondition(model.whitening, ctx_hat, y_hat[0]))
        values[i, j] = y
        padded[top + i, side + j] = y
    return values, log_q


def ancestral_sample(
    model: RideModel,
    height: int,
    width: int,
    rng: np.random.Generator,
    seed_region: Optional[Tuple[Image, Tuple[int, int]]] = None,
) -> Image:
    """
    Draw an image from the model.

    Args:
        model: The model
        height, width: Output size
        rng: Random generator
        seed_region: Optional (image, (row, col)) copied into the output
            before sampling. It must be a raster prefix: placed at (0, 0) and
            either spanning the full width or lying within the first row.

    Raises:
        DomainError: If the size is not positive or the seed is not a raster prefix
    """
    if height < 1 or width < 1:
        raise DomainError(f"Sample size must be positive, got {height}x{width}")
    values = np.zeros((height, width))
    missing = np.ones((height, width), dtype=bool)
    if seed_region is not None:
        seed, placement = seed_region
        fits = seed.height <= height and seed.width <= width
        prefix = tuple(placement) == (0, 0) and (seed.width == width or seed.height == 1)
        if not (fits and prefix):
            raise DomainError(
                f"Seed of size {seed.height}x{seed.width} at {tuple(placement)} is not a raster prefix "
                f"of a {height}x{width} image"
            )
        values[:seed.height, :seed.width] = seed.values
        missing[:seed.height, :seed.width] = False
    filled, _ = fill_ancestrally(model, values, missing, rng)
    logger.debug(f"Sampled a {height}x{width} image")
    return Image(values=filled)
