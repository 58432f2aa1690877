"""
Factorized mixture of conditional Gaussian scale mixtures (MCGSM).

For a context x the model is a mixture of experts over components c and
scales s:

    p(c, s | x)  ~  exp(eta_cs - 1/2 e^alpha_cs x^T K_c x),  K_c = sum_n beta_cn^2 b_n b_n^T
    p(y | x, c, s) = N(y; a_c^T x, e^-alpha_cs)

All mixture arithmetic happens in the log domain.
"""

from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.special import logsumexp

from misc.constants import LOG_2PI, MAX_LOG_PRECISION
from misc.exceptions import DomainError

PARAMETER_NAMES = ("eta", "alpha", "beta", "b", "a")


class McgsmParams(BaseModel):
    """
    Parameters of a factorized MCGSM.

    Shapes: eta, alpha (C, S); beta (C, N); b (N, D); a (C, D).
    beta is stored unsquared so every K_c is positive semidefinite.
    """
    eta: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    b: np.ndarray
    a: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="before")
    @classmethod
    def coerce_arrays(cls, data):
        if isinstance(data, dict):
            data = {key: np.array(value, dtype=np.float64) if key in PARAMETER_NAMES else value
                    for key, value in data.items()}
        return data

    @model_validator(mode="after")
    def check_shapes(self) -> "McgsmParams":
        C, S = self.eta.shape if self.eta.ndim == 2 else (0, 0)
        N, D = self.b.shape if self.b.ndim == 2 else (0, 0)
        if min(C, S, N, D) < 1:
            raise ValueError(f"Invalid MCGSM shapes eta={self.eta.shape}, b={self.b.shape}")
        expected = {"alpha": (C, S), "beta": (C, N), "a": (C, D)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"MCGSM parameter {name} has shape {getattr(self, name).shape}, expected {shape}")
        for name in PARAMETER_NAMES:
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"MCGSM parameter {name} has non-finite entries")
        return self

    @property
    def dim(self) -> int:
        return self.b.shape[1]

    @property
    def num_components(self) -> int:
        return self.eta.shape[0]

    @property
    def num_scales(self) -> int:
        return self.eta.shape[1]

    @property
    def num_features(self) -> int:
        return self.b.shape[0]

    @property
    def size(self) -> int:
        return sum(getattr(self, name).size for name in PARAMETER_NAMES)

    def to_vector(self) -> np.ndarray:
        """Flatten into one vector in the order (eta, alpha, beta, b, a)."""
        return np.concatenate([getattr(self, name).ravel() for name in PARAMETER_NAMES])

    def from_vector(self, vector: np.ndarray, validate: bool = True) -> "McgsmParams":
        """Build parameters shaped like self from a flat vector."""
        vector = np.asarray(vector, dtype=np.float64)
        if vector.size != self.size:
            raise DomainError(f"Parameter vector has {vector.size} entries, expected {self.size}")
        fields, offset = {}, 0
        for name in PARAMETER_NAMES:
            shape = getattr(self, name).shape
            count = int(np.prod(shape))
            fields[name] = vector[offset:offset + count].reshape(shape).copy()
            offset += count
        if validate:
            return McgsmParams(**fields)
        return McgsmParams.model_construct(**fields)

    def quadratic_form(self, c: int, x: np.ndarray) -> float:
        """x^T K_c x for component c."""
        return float(np.sum(self.beta[c] ** 2 * (self.b @ x) ** 2))


def init_mcgsm(D: int, C: int, S: int, N: int, rng: np.random.Generator) -> McgsmParams:
    """
    Initialize an MCGSM.

    eta is zero, alpha spreads the scales of every component over [-1, 1], and
    beta, b and a are zero-mean Gaussian with standard deviation 1/sqrt(D).

    Raises:
        DomainError: If any size is smaller than one
    """
    if min(D, C, S, N) < 1:
        raise DomainError(f"MCGSM sizes must be positive, got D={D}, C={C}, S={S}, N={N}")
    scale = 1.0 / np.sqrt(D)
    grid = np.linspace(-1.0, 1.0, S) if S > 1 else np.zeros(1)
    return McgsmParams(
        eta=np.zeros((C, S)),
        alpha=np.tile(grid, (C, 1)),
        beta=rng.normal(0.0, scale, (C, N)),
        b=rng.normal(0.0, scale, (N, D)),
        a=rng.normal(0.0, scale, (C, D)),
    )


def _check_inputs(params: McgsmParams, X: np.ndarray, y: Optional[np.ndarray] = None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.dim:
        raise DomainError(f"Contexts must have shape (M, {params.dim}), got {X.shape}")
    if y is None:
        return X, None
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != X.shape[0]:
        raise DomainError(f"Got {X.shape[0]} contexts but {y.shape[0]} targets")
    return X, y


def _log_precisions(params: McgsmParams) -> np.ndarray:
    return np.minimum(params.alpha, MAX_LOG_PRECISION)


def _gates(params: McgsmParams, X: np.ndarray):
    """Features, quadratic forms and normalized log gate probabilities (M, C, S)."""
    features = X @ params.b.T
    quad = (features ** 2) @ (params.beta ** 2).T
    precision = np.exp(_log_precisions(params))
    logits = params.eta[None] - 0.5 * precision[None] * quad[:, :, None]
    log_gate = logits - logsumexp(logits, axis=(1, 2), keepdims=True)
    return features, quad, log_gate


def _joint(params: McgsmParams, X: np.ndarray, y: np.ndarray):
    features, quad, log_gate = _gates(params, X)
    alpha = _log_precisions(params)
    residual = y[:, None] - X @ params.a.T
    log_expert = 0.5 * alpha[None] - 0.5 * LOG_2PI - 0.5 * np.exp(alpha)[None] * residual[:, :, None] ** 2
    joint = log_gate + log_expert
    return features, quad, log_gate, residual, joint


def gate_posterior(params: McgsmParams, ctx: np.ndarray) -> np.ndarray:
    """
    Gate probabilities p(c, s | ctx) as a (C, S) matrix summing to one.

    Raises:
        DomainError: If ctx does not have length D
    """
    X, _ = _check_inputs(params, np.reshape(ctx, (1, -1)))
    _, _, log_gate = _gates(params, X)
    return np.exp(log_gate[0])


def log_density(params: McgsmParams, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Conditional log-densities log p(y_m | x_m) for a batch, shape (M,)."""
    X, y = _check_inputs(params, X, y)
    joint = _joint(params, X, y)[-1]
    return logsumexp(joint, axis=(1, 2))


def conditional_log_density(params: McgsmParams, ctx: np.ndarray, y: float) -> float:
    """
    log sum_{c,s} p(c, s | ctx) N(y; a_c^T ctx, e^-alpha_cs).

    Raises:
        DomainError: If ctx does not have length D
    """
    return float(log_density(params, np.reshape(ctx, (1, -1)), np.array([y]))[0])


def sample(params: McgsmParams, X: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Draw one value per context: first (c, s) from the gates, then from the expert.

    Returns:
        Array of shape (M,)
    """
    X, _ = _check_inputs(params, X)
    _, _, log_gate = _gates(params, X)
    M = X.shape[0]
    S = params.num_scales
    probabilities = np.exp(log_gate.reshape(M, -1))
    cumulative = np.cumsum(probabilities, axis=1)
    u = rng.random(M)[:, None] * cumulative[:, -1:]
    index = np.minimum(np.sum(cumulative <= u, axis=1), cumulative.shape[1] - 1)
    c, s = index // S, index % S
    alpha = _log_precisions(params)
    mean = np.sum(X * params.a[c], axis=1)
    return mean + rng.standard_normal(M) * np.exp(-0.5 * alpha[c, s])


def conditional_sample(params: McgsmParams, ctx: np.ndarray, rng: np.random.Generator) -> float:
    """Draw y ~ p(y | ctx)."""
    return float(sample(params, np.reshape(ctx, (1, -1)), rng)[0])


def neg_loglik_grad(
    params: McgsmParams,
    X: np.ndarray,
    y: np.ndarray,
    return_input_grad: bool = False,
) -> Tuple:
    """
    Mean negative log-likelihood of a batch and its exact gradient.

    Args:
        params: Model parameters
        X: Contexts, shape (M, D)
        y: Targets, shape (M,)
        return_input_grad: Also return the gradient with respect to X

    Returns:
        (value, grads) or (value, grads, dX), where grads is an McgsmParams-shaped
        structure (constructed without validation)

    Raises:
        DomainError: If the batch is empty or dimensions disagree
    """
    X, y = _check_inputs(params, X, y)
    M = X.shape[0]
    if M == 0:
        raise DomainError("neg_loglik_grad needs a non-empty batch")

    features, quad, log_gate, residual, joint = _joint(params, X, y)
    log_p = logsumexp(joint, axis=(1, 2), keepdims=True)
    posterior = np.exp(joint - log_p)
    gate = np.exp(log_gate)
    delta = posterior - gate

    alpha = _log_precisions(params)
    precision = np.exp(alpha)
    active = (params.alpha < MAX_LOG_PRECISION).astype(np.float64)

    # Gate parameters see posterior minus prior, expert parameters the posterior
    d_eta = delta.sum(axis=0)
    d_alpha = (
        np.einsum("mcs,mc->cs", delta, quad) * (-0.5 * precision)
        + 0.5 * posterior.sum(axis=0)
        - 0.5 * precision * np.einsum("mcs,mc->cs", posterior, residual ** 2)
    ) * active

    # Chain through the quadratic forms into beta and b
    d_quad = -0.5 * np.einsum("mcs,cs->mc", delta, precision)
    beta_sq = params.beta ** 2
    d_beta = 2.0 * params.beta * (d_quad.T @ features ** 2)
    d_features = 2.0 * features * (d_quad @ beta_sq)
    d_b = d_features.T @ X

    d_residual = -np.einsum("mcs,cs->mc", posterior, precision) * residual
    d_a = -(d_residual.T @ X)

    scale = -1.0 / M
    grads = McgsmParams.model_construct(
        eta=scale * d_eta,
        alpha=scale * d_alpha,
        beta=scale * d_beta,
        b=scale * d_b,
        a=scale * d_a,
    )
    value = -float(np.mean(log_p))
    if not return_input_grad:
        return value, grads
    d_X = d_features @ params.b - d_residual @ params.a
    return value, grads, scale * d_X
