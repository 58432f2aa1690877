"""
Causal neighborhoods: the already-visited pixels a pixel's conditional may depend on.
"""

import numpy as np

from imaging.image import Image
from misc.exceptions import DomainError
from schema.imaging import NeighborhoodSpec


def context_grid(values: np.ndarray, spec: NeighborhoodSpec) -> np.ndarray:
    """
    Context vectors of every pixel at once.

    Pixels outside the image read as zero.

    Args:
        values: Array of shape (..., H, W)
        spec: Neighborhood geometry

    Returns:
        Array of shape (..., H, W, D) whose last axis follows spec.offsets
    """
    values = np.asarray(values, dtype=np.float64)
    height, width = values.shape[-2:]
    top, side = spec.rows_above, spec.half_width
    pad = [(0, 0)] * (values.ndim - 2) + [(top, 0), (side, side)]
    padded = np.pad(values, pad)
    columns = [
        padded[..., top + di:top + di + height, side + dj:side + dj + width]
        for di, dj in spec.offsets
    ]
    return np.stack(columns, axis=-1)


def extract_context(image: Image, i: int, j: int, spec: NeighborhoodSpec) -> np.ndarray:
    """
    Context vector of pixel (i, j) in the fixed ordering of spec.offsets.

    Raises:
        DomainError: If (i, j) lies outside the image
    """
    if not (0 <= i < image.height and 0 <= j < image.width):
        raise DomainError(f"Pixel ({i}, {j}) is outside the {image.height}x{image.width} image")
    context = np.zeros(spec.dim)
    for k, (di, dj) in enumerate(spec.offsets):
        row, col = i + di, j + dj
        if 0 <= row < image.height and 0 <= col < image.width:
            context[k] = image.values[row, col]
    return context
