"""
Log-likelihood rates of models on large images.

Images are cut into disjoint square patches, every patch is evaluated
independently and the rate is the summed log-likelihood divided by the
number of pixels, reported in bit/px.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

import numpy as np
from pydantic import BaseModel
from scipy.stats import norm

from evaluation.ensemble import TransformSet, ensemble_log_density_batch
from imaging.image import Image
from imaging.patches import extract_patches
from misc.constants import (
    DEFAULT_EVAL_PATCH,
    LOG_DET_PREPROCESSING,
    LOG_LIKELIHOOD_DC,
    LOGGER_NAME,
    PATCH_DIMS,
)
from misc.exceptions import DomainError
from models.ride import RideModel, ride_log_density_batch

logger = logging.getLogger(f"{LOGGER_NAME}.evaluation")

# Patches per work item; fixed so totals do not depend on the thread count
CHUNK_SIZE = 16


class RateReport(BaseModel):
    bits_per_pixel: float
    nats_total: float
    pixel_count: int
    patch_count: int


def _patch_stack(images: List[Image], patch_side: int) -> np.ndarray:
    if not images:
        raise DomainError("No images to evaluate")
    patches = []
    for image in images:
        if min(image.height, image.width) < patch_side:
            raise DomainError(f"Image of size {image.height}x{image.width} is smaller than the {patch_side}px patch")
        patches += extract_patches(image, patch_side, patch_side)
    return np.stack([patch.values for patch in patches])


def evaluate_rate(
    model: RideModel,
    images: List[Image],
    patch_side: int = DEFAULT_EVAL_PATCH,
    ensemble: Optional[TransformSet] = None,
    threads: int = 1,
) -> RateReport:
    """
    Evaluate a model (or its ensemble) on disjoint patches of the images.

    Args:
        model: The model
        images: Test images, each at least patch_side on both axes
        patch_side: Side of the evaluation patches
        ensemble: Optional transform set; evaluates the ensemble density per patch
        threads: Worker threads; results are identical for any value

    Raises:
        DomainError: If an image is smaller than a patch
    """
    stack = _patch_stack(images, patch_side)
    chunks = [stack[k:k + CHUNK_SIZE] for k in range(0, len(stack), CHUNK_SIZE)]

    def totals(chunk: np.ndarray) -> np.ndarray:
        if ensemble is None:
            return ride_log_density_batch(model, chunk).sum(axis=(1, 2))
        return ensemble_log_density_batch(model, ensemble, chunk)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        per_patch = np.concatenate(list(pool.map(totals, chunks)))

    nats_total = float(np.sum(per_patch))
    pixel_count = stack.size
    report = RateReport(
        bits_per_pixel=nats_total / pixel_count / math.log(2),
        nats_total=nats_total,
        pixel_count=pixel_count,
        patch_count=len(stack),
    )
    transforms = 1 if ensemble is None else len(ensemble)
    logger.info(
        f"Evaluated {report.patch_count} patches of {patch_side}px with {transforms} transform(s): "
        f"{report.bits_per_pixel:.4f} bit/px"
    )
    return report


def loglik_rate(model: RideModel, images: List[Image], patch_side: int = DEFAULT_EVAL_PATCH, threads: int = 1) -> float:
    """Log-likelihood rate in bit/px over disjoint patch_side patches."""
    return evaluate_rate(model, images, patch_side, threads=threads).bits_per_pixel


def nats63_to_bits_per_px(ell: float) -> float:
    """
    Convert the log-likelihood of a 63-dimensional DC-removed 8x8 patch (nats)
    into a bit/px rate: (ell + l_DC + ln|det A|) / 64 / ln 2.
    """
    return (ell + LOG_LIKELIHOOD_DC + LOG_DET_PREPROCESSING) / PATCH_DIMS / math.log(2)


def gaussian_baseline_rate(train: List[Image], test: List[Image], patch_side: int = DEFAULT_EVAL_PATCH) -> float:
    """
    Rate in bit/px of an iid Gaussian fitted to all training pixels, evaluated
    on the same disjoint test patches as evaluate_rate.
    """
    if not train:
        raise DomainError("No training images for the Gaussian baseline")
    pixels = np.concatenate([image.values.ravel() for image in train])
    mean, std = float(pixels.mean()), float(pixels.std())
    if not std > 0:
        raise DomainError("Training pixels are constant; the Gaussian baseline is degenerate")
    stack = _patch_stack(test, patch_side)
    nats = float(np.sum(norm.logpdf(stack, loc=mean, scale=std)))
    return nats / stack.size / math.log(2)
