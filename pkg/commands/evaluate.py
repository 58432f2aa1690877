import logging
from pathlib import Path
from typing import Optional

import typer

from commands.common import load_dataset
from evaluation.ensemble import TransformSet
from evaluation.rates import evaluate_rate
from evaluation.report import write_report
from misc.constants import DEFAULT_EVAL_PATCH, LOGGER_NAME, EnsembleName
from models.container import load_model_file

logger = logging.getLogger(f"{LOGGER_NAME}.cli")


def evaluate(
    model: Path = typer.Option(..., "--model", help="Model container"),
    data: Path = typer.Option(..., "--data", help="Directory of test images"),
    report: Path = typer.Option(..., "--report", help="Output report (metric<TAB>value lines)"),
    patch: int = typer.Option(DEFAULT_EVAL_PATCH, "--patch", min=1, help="Side of the evaluation patches"),
    ensemble: EnsembleName = typer.Option(EnsembleName.IDENTITY, "--ensemble", help="Transform ensemble"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Random seed; required for PGM inputs"),
    threads: int = typer.Option(1, "--threads", min=1, envvar="RIDE_THREADS", help="Worker threads"),
):
    """Measure the log-likelihood rate of a model in bit/px."""
    transforms = TransformSet.from_name(ensemble.value)
    ride = load_model_file(model)
    images = load_dataset(data, seed)
    result = evaluate_rate(
        ride, images, patch, ensemble=None if ensemble is EnsembleName.IDENTITY else transforms, threads=threads
    )
    report.parent.mkdir(parents=True, exist_ok=True)
    write_report(report, {
        "bits_per_pixel": result.bits_per_pixel,
        "nats_total": result.nats_total,
        "pixel_count": result.pixel_count,
        "patch_count": result.patch_count,
        "patch_side": patch,
        "ensemble": ensemble.value,
        "transforms": len(transforms),
    })
