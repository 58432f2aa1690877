#!/usr/bin/env python3
"""
Rate as a function of the causal neighborhood width on dead leaves.

For every width the neighborhood covers width // 2 rows above the pixel.
An MCGSM is trained for each width in MCGSM_WIDTHS and a one-layer RIDE for
each width in RIDE_WIDTHS, all on the same images. Widening the MCGSM
neighborhood levels off early while RIDE stays ahead at small widths.
"""

import logging
import os
import sys

import numpy as np
import typer

# Add the parent directory to the path so we can import our modules
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from evaluation.rates import evaluate_rate
from evaluation.report import write_report
from imaging.dead_leaves import generate_dead_leaves
from schema.imaging import DeadLeavesConfig, NeighborhoodSpec
from schema.training import TrainSchedule
from training.trainers import mcgsm_model, ride_from_mcgsm, train_mcgsm, train_ride

# Constants
NUM_IMAGES = 120
NUM_TRAIN = 80
NUM_VAL = 10
IMAGE_SIZE = 64
DISKS_PER_IMAGE = 250
COMPONENTS = 16
FEATURES = 16
HIDDEN_UNITS = 16
MCGSM_ITERATIONS = 500
MCGSM_WIDTHS = (3, 5, 7, 9, 11, 13)
RIDE_WIDTHS = (3, 5, 7, 9)


def run_comparison(seed: int, epochs: int, report_path: str) -> None:
    """Train both model types for every width and report the test rates."""
    print(f"Generating {NUM_IMAGES} dead-leaves images...")
    cfg = DeadLeavesConfig(size=IMAGE_SIZE, disk_count=DISKS_PER_IMAGE, radius_min=1.0, radius_max=16.0)
    images = [generate_dead_leaves(cfg, np.random.default_rng([seed, k])) for k in range(NUM_IMAGES)]
    train = images[:NUM_TRAIN]
    val = images[NUM_TRAIN:NUM_TRAIN + NUM_VAL]
    test = images[NUM_TRAIN + NUM_VAL:]

    metrics = {}
    for width in MCGSM_WIDTHS:
        spec = NeighborhoodSpec(width=width, rows_above=max(1, width // 2))
        rng = np.random.default_rng([seed, width])
        params, wt = train_mcgsm(train, val, spec, COMPONENTS, 1, FEATURES, MCGSM_ITERATIONS, rng)
        rate = evaluate_rate(mcgsm_model(spec, params, wt), test, IMAGE_SIZE).bits_per_pixel
        metrics[f"mcgsm_width_{width}"] = rate
        print(f"MCGSM, width {width} (D={spec.dim}): {rate:.4f} bit/px")

        if width in RIDE_WIDTHS:
            model = ride_from_mcgsm(spec, params, wt, [HIDDEN_UNITS], rng)
            schedule = TrainSchedule(epochs=epochs, finetune_iters=100, validation_patch=IMAGE_SIZE)
            model, _ = train_ride(model, train, val, schedule, rng)
            rate = evaluate_rate(model, test, IMAGE_SIZE).bits_per_pixel
            metrics[f"ride_width_{width}"] = rate
            print(f"RIDE, width {width}: {rate:.4f} bit/px")

    write_report(report_path, metrics)
    print(f"Report written to {report_path}")


def main(
    seed: int = typer.Option(2015, "--seed", help="Random seed"),
    epochs: int = typer.Option(3, "--epochs", min=1, help="RIDE training epochs per width"),
    report: str = typer.Option("neighborhood_size.tsv", "--report", help="Output report"),
):
    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
    run_comparison(seed, epochs, report)


if __name__ == "__main__":
    typer.run(main)
