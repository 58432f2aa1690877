import logging
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import typer

from imaging.dead_leaves import generate_dead_leaves
from imaging.image import save_image_file
from misc.constants import DEAD_LEAVES_DEFAULTS, LOGGER_NAME
from schema.imaging import DeadLeavesConfig

logger = logging.getLogger(f"{LOGGER_NAME}.cli")


def deadleaves(
    count: int = typer.Option(..., "--count", min=1, help="Number of images to generate"),
    size: int = typer.Option(..., "--size", min=1, help="Side length of every image"),
    out: Path = typer.Option(..., "--out", help="Output directory"),
    seed: int = typer.Option(..., "--seed", help="Random seed"),
    disks: int = typer.Option(DEAD_LEAVES_DEFAULTS["disk_count"], "--disks", min=0, help="Disks per image"),
    threads: int = typer.Option(1, "--threads", min=1, envvar="RIDE_THREADS", help="Worker threads"),
):
    """
    Generate a dead-leaves dataset as FGRD files.

    Image k is drawn from the stream [seed, k], so the bytes do not depend on
    the thread count.
    """
    cfg = DeadLeavesConfig(size=size, disk_count=disks)
    out.mkdir(parents=True, exist_ok=True)

    def generate(k: int) -> Path:
        path = out / f"deadleaves_{k:05d}.fgrd"
        save_image_file(path, generate_dead_leaves(cfg, np.random.default_rng([seed, k])))
        return path

    with ThreadPoolExecutor(max_workers=threads) as pool:
        paths = list(pool.map(generate, range(count)))
    logger.info(f"Wrote {len(paths)} dead-leaves images of {size}x{size} to {out}")
