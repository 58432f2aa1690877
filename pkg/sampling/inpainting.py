"""
Metropolis-within-Gibbs inpainting.

Missing pixels are initialized by ancestral sampling (best of several
candidates). Each sweep then visits overlapping blocks covering the missing
area; a block is redrawn ancestrally inside a local window around it and the
proposal is accepted with probability

    min{1, p(x') / p(x) * q(x_block | x) / q(x'_block | x')}

where p is the model applied to the window and q the product of the
conditionals the block pixels were drawn from.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np

from imaging.image import Image
from misc.constants import LOGGER_NAME
from misc.exceptions import DomainError
from models.ride import RideModel, ride_log_density, ride_log_density_batch
from sampling.ancestral import fill_ancestrally
from schema.sampling import Box, InpaintConfig

logger = logging.getLogger(f"{LOGGER_NAME}.sampling")


def log_acceptance_ratio(
    model: RideModel,
    image_current: Image,
    image_proposed: Image,
    region: Box,
    window: Box,
    resampled: Optional[np.ndarray] = None,
) -> float:
    """
    Log of the Metropolis-Hastings ratio for a block proposal.

    Args:
        model: The model
        image_current, image_proposed: Images of equal shape
        region: The block that was redrawn
        window: The local window the model is applied to; contains region
        resampled: Optional boolean image marking the pixels of region that
            were redrawn (defaults to all of region)

    Returns:
        The log ratio; may be -inf or +inf

    Raises:
        DomainError: If the images differ outside the redrawn pixels or the
            boxes do not nest inside the image
    """
    current, proposed = image_current.values, image_proposed.values
    if current.shape != proposed.shape:
        raise DomainError(f"Images differ in shape: {current.shape} vs {proposed.shape}")
    image_box = Box(top=0, left=0, bottom=current.shape[0], right=current.shape[1])
    if not (image_box.contains(window) and window.contains(region)):
        raise DomainError(f"Region {region} must lie in window {window}, which must lie in the image")

    # Check that only the resampled pixels changed
    free = np.zeros(current.shape, dtype=bool)
    free[region.slices] = True
    if resampled is not None:
        free &= np.asarray(resampled, dtype=bool)
    if np.any(current[~free] != proposed[~free]):
        raise DomainError("Proposal changes pixels outside the resampled region")

    # q is the product of the conditionals of the redrawn pixels
    grids = ride_log_density_batch(model, np.stack([current[window.slices], proposed[window.slices]]))
    local_free = free[window.slices]
    log_p_current, log_p_proposed = grids.sum(axis=(1, 2))
    log_q_current = grids[0][local_free].sum()
    log_q_proposed = grids[1][local_free].sum()
    with np.errstate(invalid="ignore"):
        return float((log_p_proposed - log_p_current) + (log_q_current - log_q_proposed))


def acceptance_probability(
    model: RideModel,
    image_current: Image,
    image_proposed: Image,
    region: Box,
    window: Box,
    resampled: Optional[np.ndarray] = None,
) -> float:
    """min{1, exp(delta)} of log_acceptance_ratio; undefined or -inf ratios give 0."""
    delta = log_acceptance_ratio(model, image_current, image_proposed, region, window, resampled)
    if np.isnan(delta) or delta == -np.inf:
        return 0.0
    return float(np.exp(min(delta, 0.0)))


def _block_boxes(mask: np.ndarray, cfg: InpaintConfig) -> List[Box]:
    """Blocks in raster order over the bounding box of the mask; blocks without missing pixels are skipped."""
    rows, cols = np.nonzero(mask)
    height, width = mask.shape
    boxes = []
    for r in range(rows.min(), rows.max() + 1, cfg.block_stride):
        for c in range(cols.min(), cols.max() + 1, cfg.block_stride):
            box = Box(top=r, left=c, bottom=min(r + cfg.block_size, height), right=min(c + cfg.block_size, width))
            if mask[box.slices].any():
                boxes.append(box)
    return boxes


def _window_around(block: Box, size: int, height: int, width: int) -> Box:
    """A size x size window centered on the block, shifted to stay inside the image."""
    def span(start: int, stop: int, limit: int):
        extent = min(size, limit)
        lo = start - (extent - (stop - start)) // 2
        lo = max(0, min(lo, limit - extent))
        return lo, lo + extent

    top, bottom = span(block.top, block.bottom, height)
    left, right = span(block.left, block.right, width)
    return Box(top=top, left=left, bottom=bottom, right=right)


def _flip(values: np.ndarray, horizontal: bool) -> np.ndarray:
    return np.ascontiguousarray(values[:, ::-1] if horizontal else values[::-1])


def _initialize(
    model: RideModel,
    values: np.ndarray,
    mask: np.ndarray,
    cfg: InpaintConfig,
    rng: np.random.Generator,
    threads: int,
) -> np.ndarray:
    # Candidates are drawn in order from rng; only the scoring runs in parallel
    candidates = [fill_ancestrally(model, values, mask, rng)[0] for _ in range(cfg.init_candidates)]

    def score(candidate: np.ndarray) -> float:
        return ride_log_density(model, Image(values=candidate))[1]

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        scores = list(pool.map(score, candidates))
    best = int(np.argmax(scores))
    logger.debug(f"Initial candidates: log-densities {[round(s, 3) for s in scores]}, keeping {best}")
    return candidates[best]


def inpaint_with_stats(
    model: RideModel,
    image: Image,
    mask: Image,
    cfg: InpaintConfig,
    rng: np.random.Generator,
    threads: int = 1,
) -> Tuple[Image, List[float]]:
    """
    Fill in the masked pixels of an image.

    Args:
        model: The model
        image: Image with observed pixels
        mask: Image of the same shape; 1 marks missing pixels, 0 observed ones
        cfg: Sampler settings
        rng: Random generator
        threads: Worker threads for scoring the initial candidates; results are identical for any value

    Returns:
        (inpainted image, acceptance rate of every sweep)

    Raises:
        DomainError: If the mask is not binary or its shape differs from the image
    """
    if mask.shape != image.shape:
        raise DomainError(f"Mask has shape {mask.shape}, image {image.shape}")
    if not np.all((mask.values == 0) | (mask.values == 1)):
        raise DomainError("Mask must contain only 0 (observed) and 1 (missing)")
    missing = mask.values == 1
    if not missing.any():
        return Image(values=image.values.copy()), []

    values = _initialize(model, image.values, missing, cfg, rng, threads)
    # Sweep over the blocks, flipping the image between sweeps
    flipped_h = flipped_v = False
    rates = []
    for sweep in range(cfg.sweeps):
        height, width = values.shape
        accepted = proposed = 0
        for block in _block_boxes(missing, cfg):
            window = _window_around(block, cfg.local_window, height, width)
            local_missing = np.zeros(missing.shape, dtype=bool)
            local_missing[block.slices] = missing[block.slices]
            patch = values[window.slices]
            # Propose by redrawing the block inside its local window
            proposal, _ = fill_ancestrally(model, patch, local_missing[window.slices], rng)
            local_block = block.relative_to(window)
            local_window = Box(top=0, left=0, bottom=patch.shape[0], right=patch.shape[1])
            delta = log_acceptance_ratio(
                model, Image(values=patch), Image(values=proposal),
                local_block, local_window, local_missing[window.slices],
            )
            proposed += 1
            u = rng.random()
            if not np.isnan(delta) and (delta >= 0 or u < np.exp(delta)):
                values[window.slices] = proposal
                accepted += 1
        rates.append(accepted / proposed)
        logger.debug(f"Sweep {sweep + 1}/{cfg.sweeps}: accepted {accepted}/{proposed} proposals")

        if cfg.flip_between_sweeps and sweep < cfg.sweeps - 1:
            horizontal = bool(rng.integers(2))
            values, missing = _flip(values, horizontal), _flip(missing, horizontal)
            if horizontal:
                flipped_h = not flipped_h
            else:
                flipped_v = not flipped_v

    if flipped_h:
        values = _flip(values, True)
    if flipped_v:
        values = _flip(values, False)
    observed = mask.values == 0
    values[observed] = image.values[observed]
    logger.info(f"Inpainted {int(missing.sum())} pixels in {cfg.sweeps} sweeps, "
                f"mean acceptance {np.mean(rates):.3f}")
    return Image(values=values), rates


def inpaint(
    model: RideModel,
    image: Image,
    mask: Image,
    cfg: InpaintConfig,
    rng: np.random.Generator,
    threads: int = 1,
) -> Image:
    """inpaint_with_stats without the acceptance statistics."""
    return inpaint_with_stats(model, image, mask, cfg, rng, threads)[0]
