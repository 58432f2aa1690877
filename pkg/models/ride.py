"""
Recurrent image density estimator (RIDE).

Each pixel's causal neighborhood is whitened, read by a stack of spatial LSTM
layers, and the MCGSM head predicts the whitened pixel from the top hidden
vector concatenated with the whitened neighborhood (the shortcut connection).
A model with no SLSTM layers is a plain MCGSM over whitened neighborhoods.
"""

from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from imaging.image import Image
from imaging.neighborhood import context_grid
from misc.constants import MODEL_VERSION
from misc.exceptions import DomainError
from models.mcgsm import McgsmParams, init_mcgsm, log_density, neg_loglik_grad
from models.slstm import SlstmLayerParams, init_slstm, stack_backward, stack_forward
from models.whitening import WhiteningTransform, precondition
from schema.imaging import NeighborhoodSpec


class RideModel(BaseModel):
    """SLSTM stack + MCGSM head + whitening preconditioner; the unit of serialization."""
    neighborhood: NeighborhoodSpec
    whitening: WhiteningTransform
    layers: List[SlstmLayerParams] = []
    head: McgsmParams
    version: str = MODEL_VERSION

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def check_dimensions(self) -> "RideModel":
        D = self.neighborhood.dim
        if self.whitening.dim != D:
            raise ValueError(f"Whitening has dimension {self.whitening.dim}, neighborhood {D}")
        expected = D
        for k, layer in enumerate(self.layers):
            if layer.input_dim != expected:
                raise ValueError(f"Layer {k} expects inputs of size {layer.input_dim}, got {expected}")
            expected = layer.hidden_dim
        if self.head.dim != self.hidden_dim + D:
            raise ValueError(f"Head expects {self.head.dim} inputs, model provides {self.hidden_dim + D}")
        return self

    @property
    def hidden_dim(self) -> int:
        """Size of the top hidden vector (0 without SLSTM layers)."""
        return self.layers[-1].hidden_dim if self.layers else 0

    @property
    def num_parameters(self) -> int:
        return sum(layer.size for layer in self.layers) + self.head.size

    def to_vector(self) -> np.ndarray:
        """All trainable parameters: layers in order, then the head."""
        return np.concatenate([layer.to_vector() for layer in self.layers] + [self.head.to_vector()])

    def from_vector(self, vector: np.ndarray) -> "RideModel":
        vector = np.asarray(vector, dtype=np.float64)
        if vector.size != self.num_parameters:
            raise DomainError(f"Parameter vector has {vector.size} entries, expected {self.num_parameters}")
        layers, offset = [], 0
        for layer in self.layers:
            layers.append(layer.from_vector(vector[offset:offset + layer.size]))
            offset += layer.size
        head = self.head.from_vector(vector[offset:])
        return self.model_copy(update={"layers": layers, "head": head})


def init_ride(
    neighborhood: NeighborhoodSpec,
    whitening: WhiteningTransform,
    hidden_dims: List[int],
    components: int,
    scales: int,
    features: int,
    rng: np.random.Generator,
    extended: bool = False,
) -> RideModel:
    """Randomly initialized RIDE; an empty hidden_dims gives a plain MCGSM."""
    layers = []
    input_dim = neighborhood.dim
    for hidden in hidden_dims:
        layers.append(init_slstm(input_dim, hidden, rng, extended=extended))
        input_dim = hidden
    top = hidden_dims[-1] if hidden_dims else 0
    head = init_mcgsm(top + neighborhood.dim, components, scales, features, rng)
    return RideModel(neighborhood=neighborhood, whitening=whitening, layers=layers, head=head)


def _as_patches(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 2:
        values = values[None]
    if values.ndim != 3 or min(values.shape[1:]) < 1:
        raise DomainError(f"Expected image values of shape (B, H, W), got {values.shape}")
    return values


def whitened_grids(model: RideModel, values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Whitened contexts (B, H, W, D) and pixels (B, H, W) of a batch of images."""
    values = _as_patches(values)
    contexts = context_grid(values, model.neighborhood)
    return precondition(model.whitening, contexts, values)


def head_inputs(model: RideModel, ctx_hat: np.ndarray):
    """Concatenate the top hidden grid with the whitened contexts; returns (inputs, states)."""
    if not model.layers:
        return ctx_hat, []
    top, states = stack_forward(model.layers, ctx_hat)
    return np.concatenate([top, ctx_hat], axis=-1), states


def ride_log_density_batch(model: RideModel, values: np.ndarray) -> np.ndarray:
    """Per-pixel log-densities in nats for a batch of equally sized images, shape (B, H, W)."""
    ctx_hat, y_hat = whitened_grids(model, values)
    inputs, _ = head_inputs(model, ctx_hat)
    flat = log_density(model.head, inputs.reshape(-1, inputs.shape[-1]), y_hat.reshape(-1))
    return flat.reshape(y_hat.shape) + model.whitening.log_jacobian


def ride_log_density(model: RideModel, image: Image) -> Tuple[np.ndarray, float]:
    """
    Exact log-density of an image under the chain-rule factorization.

    Returns:
        (per-pixel log-density grid in nats, total in nats)
    """
    grid = ride_log_density_batch(model, image.values)[0]
    return grid, float(np.sum(grid))


def ride_neg_loglik_grad(model: RideModel, values: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Mean negative log-likelihood per pixel (nats) of a batch of patches.

    Args:
        model: The model
        values: Patches of shape (B, H, W)

    Returns:
        (value, gradient vector laid out like model.to_vector())
    """
    ctx_hat, y_hat = whitened_grids(model, values)
    inputs, states = head_inputs(model, ctx_hat)
    flat_inputs = inputs.reshape(-1, inputs.shape[-1])
    value, head_grads, d_inputs = neg_loglik_grad(
        model.head, flat_inputs, y_hat.reshape(-1), return_input_grad=True
    )
    value -= model.whitening.log_jacobian
    parts = []
    # Only the hidden block of the head inputs flows back into the stack
    if model.layers:
        d_top = d_inputs[:, :model.hidden_dim].reshape(inputs.shape[:-1] + (model.hidden_dim,))
        _, layer_grads = stack_backward(model.layers, states, d_top)
        parts = [grads.to_vector() for grads in layer_grads]
    return value, np.concatenate(parts + [head_grads.to_vector()])
