"""
Training loops for the standalone MCGSM and for RIDE.

The MCGSM is fit with L-BFGS on (context, pixel) pairs sampled from the
training images. RIDE alternates epochs of momentum SGD over random patches
with L-BFGS finetuning of its MCGSM head, keeping the snapshot with the best
validation rate.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np

from evaluation.rates import loglik_rate
from imaging.image import Image
from imaging.neighborhood import context_grid
from misc.constants import LOGGER_NAME, MCGSM_TRAINING_PAIRS
from misc.exceptions import DomainError, TrainingDivergedError
from models.mcgsm import McgsmParams, init_mcgsm, neg_loglik_grad
from models.ride import RideModel, head_inputs, init_ride, ride_neg_loglik_grad, whitened_grids
from models.whitening import WhiteningTransform, fit_whitening, precondition
from schema.imaging import NeighborhoodSpec
from schema.training import EpochRecord, LbfgsConfig, TrainingLog, TrainSchedule
from training.optim import SgdState, lbfgs_minimize, sgd_step

logger = logging.getLogger(f"{LOGGER_NAME}.training")


def sample_training_pairs(
    images: List[Image],
    spec: NeighborhoodSpec,
    count: int,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Draw (context, pixel) pairs uniformly without replacement over all pixels
    of all images. Contexts of border pixels are zero-padded.

    Returns:
        (X of shape (count, D), y of shape (count,))

    Raises:
        DomainError: If the images hold fewer than count pixels
    """
    if not images:
        raise DomainError("No training images")
    total = sum(image.values.size for image in images)
    if count < 1 or count > total:
        raise DomainError(f"Cannot sample {count} pairs from {total} pixels")
    chosen = np.sort(rng.choice(total, size=count, replace=False))
    X = np.empty((count, spec.dim))
    y = np.empty(count)
    start = 0
    for image in images:
        stop = start + image.values.size
        lo, hi = np.searchsorted(chosen, [start, stop])
        if hi > lo:
            local = chosen[lo:hi] - start
            X[lo:hi] = context_grid(image.values, spec).reshape(-1, spec.dim)[local]
            y[lo:hi] = image.values.ravel()[local]
        start = stop
    return X, y


def mcgsm_model(spec: NeighborhoodSpec, params: McgsmParams, wt: WhiteningTransform) -> RideModel:
    """Wrap a standalone MCGSM as a RIDE model without SLSTM layers."""
    return RideModel(neighborhood=spec, whitening=wt, layers=[], head=params)


def ride_from_mcgsm(
    spec: NeighborhoodSpec,
    params: McgsmParams,
    wt: WhiteningTransform,
    hidden_dims: List[int],
    rng: np.random.Generator,
    extended: bool = False,
) -> RideModel:
    """
    RIDE model whose head starts from a trained MCGSM.

    The whitened-context block of the head inputs gets the MCGSM weights and
    the hidden block starts at zero, so the new model has the MCGSM's density
    until training moves it.
    """
    model = init_ride(
        spec, wt, hidden_dims, params.num_components, params.num_scales, params.num_features, rng, extended,
    )
    hidden = model.hidden_dim
    head = model.head.model_copy(update={
        "eta": params.eta.copy(),
        "alpha": params.alpha.copy(),
        "beta": params.beta.copy(),
        "b": np.hstack([np.zeros((params.num_features, hidden)), params.b]),
        "a": np.hstack([np.zeros((params.num_components, hidden)), params.a]),
    })
    return model.model_copy(update={"head": head})


def _validation_side(images: List[Image], preferred: int) -> int:
    return min(preferred, min(min(image.height, image.width) for image in images))


def _head_objective(head: McgsmParams, X: np.ndarray, y: np.ndarray):
    def objective(vector: np.ndarray):
        value, grads = neg_loglik_grad(head.from_vector(vector, validate=False), X, y)
        return value, grads.to_vector()

    return objective


def train_mcgsm(
    train: List[Image],
    val: List[Image],
    spec: NeighborhoodSpec,
    components: int,
    scales: int,
    features: int,
    max_iters: int,
    rng: np.random.Generator,
    num_pairs: Optional[int] = None,
    threads: int = 1,
) -> Tuple[McgsmParams, WhiteningTransform]:
    """
    Fit a factorized MCGSM to causal neighborhoods of the training images.

    Args:
        train: Training images
        val: Validation images; only used to report the final rate (may be empty)
        spec: Neighborhood geometry
        components, scales, features: MCGSM sizes (C, S, N)
        max_iters: L-BFGS iteration limit
        rng: Random generator for pair sampling and initialization
        num_pairs: Pairs to sample; defaults to all pixels, capped at one million
        threads: Worker threads for the validation rate

    Returns:
        (head parameters over whitened contexts, whitening transform)
    """
    total = sum(image.values.size for image in train)
    count = num_pairs if num_pairs is not None else min(total, MCGSM_TRAINING_PAIRS)
    X, y = sample_training_pairs(train, spec, count, rng)
    wt = fit_whitening(X, y)
    X_hat, y_hat = precondition(wt, X, y)
    params = init_mcgsm(spec.dim, components, scales, features, rng)

    objective = _head_objective(params, X_hat, y_hat)
    result = lbfgs_minimize(objective, params.to_vector(), LbfgsConfig(max_iterations=max_iters))
    params = params.from_vector(result.params)
    logger.info(
        f"MCGSM trained on {count} pairs: {result.iterations} L-BFGS iterations, "
        f"loss {result.history[0] - wt.log_jacobian:.4f} -> {result.value - wt.log_jacobian:.4f} nats/px"
        f"{' (line search failed)' if result.line_search_failed else ''}"
    )
    if val:
        side = _validation_side(val, 64)
        rate = loglik_rate(mcgsm_model(spec, params, wt), val, side, threads=threads)
        logger.info(f"MCGSM validation rate {rate:.4f} bit/px on {side}px patches")
    return params, wt


def _sample_patches(
    images: List[Image],
    side: int,
    count: int,
    rng: np.random.Generator,
    flips: bool,
) -> np.ndarray:
    """Uniformly placed side x side patches; with flips, each is flipped horizontally or vertically or kept."""
    patches = np.empty((count, side, side))
    for k in range(count):
        image = images[rng.integers(len(images))]
        r = rng.integers(image.height - side + 1)
        c = rng.integers(image.width - side + 1)
        patch = image.values[r:r + side, c:c + side]
        if flips:
            choice = rng.integers(3)
            if choice == 1:
                patch = patch[:, ::-1]
            elif choice == 2:
                patch = patch[::-1]
        patches[k] = patch
    return patches


def _finetune_head(
    model: RideModel,
    train: List[Image],
    side: int,
    schedule: TrainSchedule,
    rng: np.random.Generator,
) -> Tuple[RideModel, float]:
    patches = _sample_patches(train, side, schedule.finetune_patches, rng, schedule.augment_flips)
    ctx_hat, y_hat = whitened_grids(model, patches)
    inputs, _ = head_inputs(model, ctx_hat)
    X = inputs.reshape(-1, inputs.shape[-1])
    y = y_hat.reshape(-1)
    result = lbfgs_minimize(
        _head_objective(model.head, X, y),
        model.head.to_vector(),
        LbfgsConfig(max_iterations=schedule.finetune_iters),
    )
    if result.line_search_failed:
        logger.warning(f"Head finetuning stopped early after {result.iterations} iterations (line search failed)")
    head = model.head.from_vector(result.params)
    return model.model_copy(update={"head": head}), result.value - model.whitening.log_jacobian


def train_ride(
    model: RideModel,
    train: List[Image],
    val: List[Image],
    schedule: TrainSchedule,
    rng: np.random.Generator,
    threads: int = 1,
) -> Tuple[RideModel, TrainingLog]:
    """
    Train all parameters of a RIDE model.

    Every epoch runs momentum SGD on batches of patches of that epoch's size,
    then finetunes the head with L-BFGS while the SLSTM layers are frozen, then
    measures the validation rate. The learning rate decays geometrically over
    the epochs. The best model seen (the initial one included) is returned;
    training stops after early_stop_patience epochs without improvement.

    Batch randomness comes from a stream per (epoch, batch), so a run is fully
    determined by rng; threads only parallelizes the validation rates.

    Raises:
        DomainError: If a patch size exceeds the smallest training image or val is empty
        TrainingDivergedError: If a batch loss or the updated parameters are not finite
    """
    log = TrainingLog()
    if schedule.epochs == 0:
        return model, log
    if not train or not val:
        raise DomainError("train_ride needs training and validation images")
    # Check the patch schedule against the training images
    smallest = min(min(image.height, image.width) for image in train)
    if max(schedule.patch_sizes) > smallest:
        raise DomainError(f"Patch size {max(schedule.patch_sizes)} exceeds the smallest training image ({smallest}px)")

    seed = int(rng.integers(2 ** 63))
    val_side = _validation_side(val, schedule.validation_patch)
    total_pixels = sum(image.values.size for image in train)

    best_model = model
    best_rate = loglik_rate(model, val, val_side, threads=threads)
    log.initial_validation_rate = log.best_validation_rate = best_rate
    logger.info(f"Initial validation rate {best_rate:.4f} bit/px on {val_side}px patches")

    current = model
    stale = 0
    for epoch in range(schedule.epochs):
        side = schedule.patch_sizes[epoch]
        lr = schedule.learning_rate(epoch)
        batches = schedule.batches_per_epoch or max(1, total_pixels // (schedule.batch_size * side * side))
        # Velocity restarts every epoch
        state = SgdState.zeros(current.num_parameters, schedule.momentum, lr)
        vector = current.to_vector()
        losses = []
        for batch in range(batches):
            batch_rng = np.random.default_rng([seed, epoch, batch])
            patches = _sample_patches(train, side, schedule.batch_size, batch_rng, schedule.augment_flips)
            loss, grads = ride_neg_loglik_grad(current, patches)
            if not np.isfinite(loss) or not np.all(np.isfinite(grads)):
                raise TrainingDivergedError(epoch, batch, loss)
            vector, state = sgd_step(state, vector, grads)
            if not np.all(np.isfinite(vector)):
                raise TrainingDivergedError(epoch, batch, loss)
            current = current.from_vector(vector)
            losses.append(loss)

        finetune_loss = None
        if schedule.finetune_iters > 0:
            finetune_rng = np.random.default_rng([seed, epoch, batches])
            current, finetune_loss = _finetune_head(current, train, side, schedule, finetune_rng)

        # Keep the best snapshot
        rate = loglik_rate(current, val, val_side, threads=threads)
        improved = rate > best_rate
        if improved:
            best_model, best_rate, stale = current, rate, 0
            log.best_epoch, log.best_validation_rate = epoch, rate
        else:
            stale += 1
        log.epochs.append(EpochRecord(
            epoch=epoch,
            patch_size=side,
            learning_rate=lr,
            batches=batches,
            train_loss=float(np.mean(losses)),
            finetune_loss=finetune_loss,
            validation_rate=rate,
            improved=improved,
        ))
        logger.info(
            f"Epoch {epoch + 1}/{schedule.epochs}: patch {side}px, lr {lr:.3g}, "
            f"train loss {np.mean(losses):.4f} nats/px, validation {rate:.4f} bit/px"
            f"{' (best)' if improved else ''}"
        )
        if stale >= schedule.early_stop_patience:
            log.stopped_early = True
            logger.info(f"No improvement for {stale} epochs, stopping")
            break

    return best_model, log
