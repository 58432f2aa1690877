#!/usr/bin/env python3
"""
Texture synthesis and inpainting on a single texture.

The texture (640x640 pixels for the usual protocol) is split into a 4x4 grid
of regions. Fifteen regions train an MCGSM and a RIDE model, the remaining
randomly chosen region is held out. RIDE trains on patches growing from 20 to
40 pixels. Both models then synthesize a texture of the region size, and RIDE
inpaints a square hole in the middle of the held-out region.
"""

import logging
import os
import sys
from pathlib import Path

import numpy as np
import typer

# Add the parent directory to the path so we can import our modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from commands.common import load_image_input, save_output_image
from evaluation.rates import evaluate_rate
from evaluation.report import write_report
from imaging.image import Image
from imaging.patches import split_regions
from sampling.ancestral import ancestral_sample
from sampling.inpainting import inpaint_with_stats
from schema.imaging import NeighborhoodSpec
from schema.sampling import InpaintConfig
from schema.training import TrainSchedule, default_patch_sizes
from training.trainers import mcgsm_model, ride_from_mcgsm, train_mcgsm, train_ride

# Constants
GRID = 4
SMALLEST_PATCH = 20
LARGEST_PATCH = 40
COMPONENTS = 8
FEATURES = 16
HIDDEN_UNITS = 32
MCGSM_ITERATIONS = 1000
HOLE_SIZE = 71


def run_texture(texture_path: Path, seed: int, epochs: int, sweeps: int, out_dir: Path) -> None:
    """Train both models on one texture, sample from each and inpaint the held-out region."""
    texture = load_image_input(texture_path, seed)
    regions = split_regions(texture, GRID, GRID)
    rng = np.random.default_rng([seed, GRID])
    held_out = int(rng.integers(len(regions)))
    train = [region for k, region in enumerate(regions) if k != held_out]
    test = [regions[held_out]]
    side = min(test[0].height, test[0].width)
    print(f"Split a {texture.height}x{texture.width} texture into {len(regions)} regions, holding out region {held_out}")

    spec = NeighborhoodSpec(width=5, rows_above=2)
    params, wt = train_mcgsm(train, test, spec, COMPONENTS, 1, FEATURES, MCGSM_ITERATIONS, rng)
    mcgsm = mcgsm_model(spec, params, wt)
    mcgsm_rate = evaluate_rate(mcgsm, test, side).bits_per_pixel
    print(f"MCGSM: {mcgsm_rate:.4f} bit/px on the held-out region")

    # The held-out region also serves as the validation set
    schedule = TrainSchedule(
        epochs=epochs,
        patch_sizes=default_patch_sizes(epochs, SMALLEST_PATCH, LARGEST_PATCH),
        finetune_iters=100,
        validation_patch=side,
    )
    model, log = train_ride(ride_from_mcgsm(spec, params, wt, [HIDDEN_UNITS], rng), train, test, schedule, rng)
    ride_rate = evaluate_rate(model, test, side).bits_per_pixel
    print(f"RIDE ({len(log.epochs)} epochs): {ride_rate:.4f} bit/px on the held-out region")

    out_dir.mkdir(parents=True, exist_ok=True)
    save_output_image(out_dir / "mcgsm_sample.pgm", ancestral_sample(mcgsm, side, side, rng))
    save_output_image(out_dir / "ride_sample.pgm", ancestral_sample(model, side, side, rng))

    hole = min(HOLE_SIZE, side - 2)
    start = (side - hole) // 2
    mask = np.zeros((side, side))
    mask[start:start + hole, start:start + hole] = 1.0
    filled, rates = inpaint_with_stats(model, test[0], Image(values=mask), InpaintConfig(sweeps=sweeps), rng)
    save_output_image(out_dir / "inpainted.pgm", filled)
    print(f"Inpainted a {hole}x{hole} hole, final acceptance rate {rates[-1]:.3f}")

    write_report(out_dir / "texture_synthesis.tsv", {
        "held_out_region": held_out,
        "mcgsm_bits_per_pixel": mcgsm_rate,
        "ride_bits_per_pixel": ride_rate,
        "ride_minus_mcgsm": ride_rate - mcgsm_rate,
        "inpainting_acceptance": rates[-1],
    })
    print(f"Samples and report written to {out_dir}")


def main(
    texture: Path = typer.Option(..., "--texture", help="Texture image (.fgrd or 8-bit .pgm)"),
    seed: int = typer.Option(2015, "--seed", help="Random seed"),
    epochs: int = typer.Option(6, "--epochs", min=1, help="RIDE training epochs"),
    sweeps: int = typer.Option(100, "--sweeps", min=1, help="Inpainting sweeps"),
    out_dir: Path = typer.Option(Path("texture_synthesis"), "--out-dir", help="Directory for samples and report"),
):
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    run_texture(texture, seed, epochs, sweeps, out_dir)


if __name__ == "__main__":
    typer.run(main)
