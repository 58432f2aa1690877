"""
Spatial LSTM layers over a two-dimensional grid.

Every memory unit has two predecessors, c[i, j-1] (left) and c[i-1, j] (above),
each with its own forget gate:

    (g, o, i, f_r, f_c) = (tanh, sigmoid, sigmoid, sigmoid, sigmoid)(A z + bias)
    c[i, j] = g * i + c[i, j-1] * f_c + c[i-1, j] * f_r
    h[i, j] = tanh(c[i, j] * o)

with z = (x[i, j], h[i, j-1], h[i-1, j]) and, for extended layers, also
(c[i, j-1], c[i-1, j]). States outside the grid are zero. Grids are batched
arrays of shape (B, H, W, dim) and are processed in raster order.
"""

from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.special import expit

from misc.exceptions import DomainError

# Row blocks of A and bias, in order
GATE_BLOCKS = ("g", "o", "i", "f_r", "f_c")


class SlstmLayerParams(BaseModel):
    """Affine map (A, bias) of one SLSTM layer; extended layers also read memory units."""
    A: np.ndarray
    bias: np.ndarray
    extended: bool = False

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="before")
    @classmethod
    def coerce_arrays(cls, data):
        if isinstance(data, dict):
            data = dict(data)
            for key in ("A", "bias"):
                if key in data:
                    data[key] = np.array(data[key], dtype=np.float64)
        return data

    @model_validator(mode="after")
    def check_shapes(self) -> "SlstmLayerParams":
        if self.bias.ndim != 1 or self.bias.size == 0 or self.bias.size % len(GATE_BLOCKS):
            raise ValueError(f"SLSTM bias length must be a positive multiple of 5, got {self.bias.shape}")
        hidden = self.bias.size // len(GATE_BLOCKS)
        recurrent = (4 if self.extended else 2) * hidden
        if self.A.ndim != 2 or self.A.shape[0] != self.bias.size or self.A.shape[1] <= recurrent:
            raise ValueError(f"SLSTM matrix has shape {self.A.shape}, incompatible with {hidden} hidden units")
        if not (np.all(np.isfinite(self.A)) and np.all(np.isfinite(self.bias))):
            raise ValueError("SLSTM parameters have non-finite entries")
        return self

    @property
    def hidden_dim(self) -> int:
        return self.bias.size // len(GATE_BLOCKS)

    @property
    def input_dim(self) -> int:
        return self.A.shape[1] - (4 if self.extended else 2) * self.hidden_dim

    @property
    def size(self) -> int:
        return self.A.size + self.bias.size

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.A.ravel(), self.bias])

    def from_vector(self, vector: np.ndarray, validate: bool = True) -> "SlstmLayerParams":
        vector = np.asarray(vector, dtype=np.float64)
        if vector.size != self.size:
            raise DomainError(f"Parameter vector has {vector.size} entries, expected {self.size}")
        fields = {
            "A": vector[:self.A.size].reshape(self.A.shape).copy(),
            "bias": vector[self.A.size:].copy(),
            "extended": self.extended,
        }
        if validate:
            return SlstmLayerParams(**fields)
        return SlstmLayerParams.model_construct(**fields)


class GridState(BaseModel):
    """Activations of one layer after a forward pass, kept for the backward pass."""
    inputs: np.ndarray
    h: np.ndarray
    c: np.ndarray
    gates: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def height(self) -> int:
        return self.h.shape[1]

    @property
    def width(self) -> int:
        return self.h.shape[2]


def init_slstm(input_dim: int, hidden_dim: int, rng: np.random.Generator, extended: bool = False) -> SlstmLayerParams:
    """A ~ N(0, 1/fan_in), zero bias."""
    if input_dim < 1 or hidden_dim < 1:
        raise DomainError(f"SLSTM sizes must be positive, got input_dim={input_dim}, hidden_dim={hidden_dim}")
    fan_in = input_dim + (4 if extended else 2) * hidden_dim
    return SlstmLayerParams(
        A=rng.normal(0.0, 1.0 / np.sqrt(fan_in), (5 * hidden_dim, fan_in)),
        bias=np.zeros(5 * hidden_dim),
        extended=extended,
    )


def _as_batch(inputs: np.ndarray) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=np.float64)
    if inputs.ndim == 3:
        inputs = inputs[None]
    if inputs.ndim != 4:
        raise DomainError(f"Input grid must have shape (B, H, W, dim) or (H, W, dim), got {inputs.shape}")
    return inputs


def slstm_step(
    params: SlstmLayerParams,
    x: np.ndarray,
    h_left: np.ndarray,
    h_up: np.ndarray,
    c_left: np.ndarray,
    c_up: np.ndarray,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    One cell update for a batch of rows.

    Returns:
        (h, c, gates), gates being the post-activation blocks (g, o, i, f_r, f_c)
    """
    parts = [x, h_left, h_up]
    if params.extended:
        parts += [c_left, c_up]
    z = np.concatenate(parts, axis=-1)
    pre = z @ params.A.T + params.bias
    H = params.hidden_dim
    g = np.tanh(pre[..., :H])
    sig = expit(pre[..., H:])
    o, i, f_r, f_c = sig[..., :H], sig[..., H:2 * H], sig[..., 2 * H:3 * H], sig[..., 3 * H:]
    c = g * i + c_left * f_c + c_up * f_r
    h = np.tanh(c * o)
    return h, c, np.concatenate([g, sig], axis=-1)


def slstm_forward(params: SlstmLayerParams, inputs: np.ndarray) -> GridState:
    """
    Run one layer over a grid in raster order.

    Args:
        params: Layer parameters
        inputs: Grid of shape (B, H, W, input_dim) or (H, W, input_dim)

    Returns:
        GridState with batched arrays of shape (B, H, W, ...)

    Raises:
        DomainError: If the input dimension does not match the layer
    """
    inputs = _as_batch(inputs)
    B, height, width, dim = inputs.shape
    if dim != params.input_dim:
        raise DomainError(f"SLSTM layer expects inputs of size {params.input_dim}, got {dim}")
    H = params.hidden_dim
    h = np.zeros((B, height, width, H))
    c = np.zeros((B, height, width, H))
    gates = np.zeros((B, height, width, 5 * H))
    zero = np.zeros((B, H))
    for i in range(height):
        for j in range(width):
            h_left, c_left = (h[:, i, j - 1], c[:, i, j - 1]) if j > 0 else (zero, zero)
            h_up, c_up = (h[:, i - 1, j], c[:, i - 1, j]) if i > 0 else (zero, zero)
            h[:, i, j], c[:, i, j], gates[:, i, j] = slstm_step(
                params, inputs[:, i, j], h_left, h_up, c_left, c_up
            )
    return GridState(inputs=inputs, h=h, c=c, gates=gates)


def slstm_backward(
    params: SlstmLayerParams,
    state: GridState,
    dh: np.ndarray,
) -> Tuple[np.ndarray, SlstmLayerParams]:
    """
    Exact reverse-mode gradients of one layer.

    Cells are visited in reverse raster order; gradients flow into both
    predecessors (left and above).

    Args:
        params: Layer parameters used for the forward pass
        state: Result of slstm_forward
        dh: Gradient with respect to the hidden grid, same shape as state.h

    Returns:
        (dinputs, grads) where grads has the shape of params
    """
    dh = np.asarray(dh, dtype=np.float64)
    if dh.ndim == 3:
        dh = dh[None]
    if dh.shape != state.h.shape:
        raise DomainError(f"Hidden gradient has shape {dh.shape}, expected {state.h.shape}")
    if state.inputs.shape[-1] != params.input_dim or state.h.shape[-1] != params.hidden_dim:
        raise DomainError("Grid state does not match the layer parameters")

    B, height, width, _ = state.h.shape
    H = params.hidden_dim
    I = params.input_dim
    dh_acc = dh.copy()
    dc_acc = np.zeros_like(state.c)
    dinputs = np.zeros_like(state.inputs)
    dA = np.zeros_like(params.A)
    dbias = np.zeros_like(params.bias)
    zero = np.zeros((B, H))

    for i in reversed(range(height)):
        for j in reversed(range(width)):
            h_left, c_left = (state.h[:, i, j - 1], state.c[:, i, j - 1]) if j > 0 else (zero, zero)
            h_up, c_up = (state.h[:, i - 1, j], state.c[:, i - 1, j]) if i > 0 else (zero, zero)
            gates = state.gates[:, i, j]
            g, o, ig, f_r, f_c = (gates[:, k * H:(k + 1) * H] for k in range(5))
            c = state.c[:, i, j]
            h = state.h[:, i, j]

            # Through h = tanh(c * o) into the cell and the gate pre-activations
            dt = dh_acc[:, i, j] * (1.0 - h ** 2)
            dc = dc_acc[:, i, j] + dt * o
            d_pre = np.concatenate([
                dc * ig * (1.0 - g ** 2),
                dt * c * o * (1.0 - o),
                dc * g * ig * (1.0 - ig),
                dc * c_up * f_r * (1.0 - f_r),
                dc * c_left * f_c * (1.0 - f_c),
            ], axis=-1)

            parts = [state.inputs[:, i, j], h_left, h_up]
            if params.extended:
                parts += [c_left, c_up]
            z = np.concatenate(parts, axis=-1)
            dA += d_pre.T @ z
            dbias += d_pre.sum(axis=0)
            dz = d_pre @ params.A

            # Send the rest back to the left and upper neighbors
            dinputs[:, i, j] = dz[:, :I]
            if j > 0:
                dh_acc[:, i, j - 1] += dz[:, I:I + H]
                dc_acc[:, i, j - 1] += dc * f_c
                if params.extended:
                    dc_acc[:, i, j - 1] += dz[:, I + 2 * H:I + 3 * H]
            if i > 0:
                dh_acc[:, i - 1, j] += dz[:, I + H:I + 2 * H]
                dc_acc[:, i - 1, j] += dc * f_r
                if params.extended:
                    dc_acc[:, i - 1, j] += dz[:, I + 3 * H:]

    grads = SlstmLayerParams.model_construct(A=dA, bias=dbias, extended=params.extended)
    return dinputs, grads


def _check_chain(layers: List[SlstmLayerParams], input_dim: int) -> None:
    if not layers:
        raise DomainError("A stack needs at least one SLSTM layer")
    expected = input_dim
    for k, layer in enumerate(layers):
        if layer.input_dim != expected:
            raise DomainError(f"Layer {k} expects inputs of size {layer.input_dim}, got {expected}")
        expected = layer.hidden_dim


def stack_forward(layers: List[SlstmLayerParams], inputs: np.ndarray) -> Tuple[np.ndarray, List[GridState]]:
    """
    Feed each layer's hidden grid to the next layer.

    Returns:
        (top hidden grid of shape (B, H, W, hidden), per-layer states)
    """
    inputs = _as_batch(inputs)
    _check_chain(layers, inputs.shape[-1])
    states = []
    grid = inputs
    for layer in layers:
        state = slstm_forward(layer, grid)
        states.append(state)
        grid = state.h
    return grid, states


def stack_backward(
    layers: List[SlstmLayerParams],
    states: List[GridState],
    dh_top: np.ndarray,
) -> Tuple[np.ndarray, List[SlstmLayerParams]]:
    """Backpropagate through a stack; returns (dinputs, per-layer grads in layer order)."""
    if len(layers) != len(states):
        raise DomainError(f"Got {len(layers)} layers but {len(states)} states")
    grads = []
    grad = dh_top
    for layer, state in zip(reversed(layers), reversed(states)):
        grad, layer_grads = slstm_backward(layer, state, grad)
        grads.append(layer_grads)
    return grad, grads[::-1]
