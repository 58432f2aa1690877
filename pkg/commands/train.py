import logging
from pathlib import Path
from typing import Optional

import numpy as np
import typer

from commands.common import MODEL_STREAM, load_dataset
from misc.config import CliConfig, parse_config_file
from misc.constants import LOGGER_NAME
from models.container import save_model_file
from models.ride import init_ride
from models.whitening import fit_whitening
from training.trainers import mcgsm_model, sample_training_pairs, train_mcgsm, train_ride

logger = logging.getLogger(f"{LOGGER_NAME}.cli")

# Pairs used to fit the whitening transform of a RIDE model
WHITENING_PAIRS = 100_000


def train(
    data: Path = typer.Option(..., "--data", help="Directory of training images"),
    val: Path = typer.Option(..., "--val", help="Directory of validation images"),
    out: Path = typer.Option(..., "--out", help="Output model container"),
    seed: int = typer.Option(..., "--seed", help="Random seed"),
    config: Optional[Path] = typer.Option(None, "--config", help="Config file (key = value per line)"),
    mcgsm_only: bool = typer.Option(False, "--mcgsm-only", help="Train a plain MCGSM instead of RIDE"),
    threads: int = typer.Option(1, "--threads", min=1, envvar="RIDE_THREADS", help="Worker threads"),
):
    """Train an MCGSM or a RIDE model and write it as a container."""
    cfg = parse_config_file(config) if config else CliConfig()
    train_images = load_dataset(data, seed)
    val_images = load_dataset(val, seed)
    spec = cfg.neighborhood()
    rng = np.random.default_rng([seed, MODEL_STREAM])

    if mcgsm_only or not cfg.hidden_units:
        params, wt = train_mcgsm(
            train_images, val_images, spec, cfg.components, cfg.scales, cfg.features,
            cfg.mcgsm_iterations, rng, cfg.mcgsm_pairs, threads=threads,
        )
        model = mcgsm_model(spec, params, wt)
    else:
        total = sum(image.values.size for image in train_images)
        X, y = sample_training_pairs(train_images, spec, min(total, WHITENING_PAIRS), rng)
        model = init_ride(
            spec, fit_whitening(X, y), cfg.hidden_units, cfg.components, cfg.scales, cfg.features,
            rng, extended=cfg.extended,
        )
        model, log = train_ride(model, train_images, val_images, cfg.schedule(), rng, threads=threads)
        if log.epochs:
            logger.info(
                f"Best validation rate {log.best_validation_rate:.4f} bit/px "
                f"(epoch {log.best_epoch + 1 if log.best_epoch >= 0 else 'initial'})"
            )
    out.parent.mkdir(parents=True, exist_ok=True)
    save_model_file(out, model)
