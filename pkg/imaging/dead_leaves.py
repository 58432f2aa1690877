"""
Dead-leaves images: random disks of random intensity and size, superimposed so
that later disks occlude earlier ones.
"""

import logging

import numpy as np

from imaging.image import Image
from misc.constants import LOGGER_NAME
from schema.imaging import DeadLeavesConfig

logger = logging.getLogger(f"{LOGGER_NAME}.imaging.dead_leaves")


def sample_radii(cfg: DeadLeavesConfig, count: int, rng: np.random.Generator) -> np.ndarray:
    """Radii from the power law p(r) ~ r^-exponent truncated to [radius_min, radius_max]."""
    u = rng.random(count)
    r_min, r_max, exponent = cfg.radius_min, cfg.radius_max, cfg.radius_exponent
    if np.isclose(exponent, 1.0):
        return r_min * (r_max / r_min) ** u
    power = 1.0 - exponent
    low, high = r_min ** power, r_max ** power
    return (low + u * (high - low)) ** (1.0 / power)


def paint_disks(size: int, background: float, disks: np.ndarray) -> Image:
    """
    Render disks back to front onto a constant background.

    Args:
        size: Pixels per side
        background: Background intensity
        disks: Array of shape (K, 4) with rows (center_row, center_col, radius, intensity)

    Returns:
        The rendered size x size Image
    """
    values = np.full((size, size), float(background))
    for center_row, center_col, radius, intensity in np.asarray(disks, dtype=np.float64).reshape(-1, 4):
        top = max(int(np.floor(center_row - radius)), 0)
        bottom = min(int(np.ceil(center_row + radius)) + 1, size)
        left = max(int(np.floor(center_col - radius)), 0)
        right = min(int(np.ceil(center_col + radius)) + 1, size)
        if top >= bottom or left >= right:
            continue
        rows = np.arange(top, bottom)[:, None] - center_row
        cols = np.arange(left, right)[None, :] - center_col
        inside = rows ** 2 + cols ** 2 <= radius ** 2
        values[top:bottom, left:right][inside] = intensity
    return Image(values=values)


def generate_dead_leaves(cfg: DeadLeavesConfig, rng: np.random.Generator) -> Image:
    """
    Generate one dead-leaves image.

    Disk centers are uniform over the image, radii follow the truncated power
    law and intensities are uniform in cfg.intensity_range.
    """
    count = cfg.disk_count
    centers = rng.random((count, 2)) * cfg.size
    radii = sample_radii(cfg, count, rng)
    low, high = cfg.intensity_range
    intensities = low + (high - low) * rng.random(count)
    disks = np.column_stack([centers, radii, intensities]) if count else np.zeros((0, 4))
    logger.debug(f"Painting {count} disks on a {cfg.size}x{cfg.size} canvas")
    return paint_disks(cfg.size, cfg.background, disks)
