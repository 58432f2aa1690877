"""
Conditional whitening of (context, pixel) pairs.

    x_hat = C_xx^-1/2 (x - m_x)
    y_hat = W (y - C_yx C_xx^-1/2 x_hat - m_y),   W = (C_yy - C_yx C_xx^-1 C_yx^T)^-1/2

Densities of y are recovered from densities of y_hat by adding log W.
"""

import logging
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator
from scipy.linalg import eigh

from misc.constants import LOGGER_NAME, WHITENING_RIDGE
from misc.exceptions import DomainError, NumericError

logger = logging.getLogger(f"{LOGGER_NAME}.models.whitening")


class WhiteningTransform(BaseModel):
    """Affine preconditioner for scalar pixels with a D-dimensional context."""
    m_x: np.ndarray
    m_y: float
    Cxx_inv_sqrt: np.ndarray
    Cyx_white: np.ndarray
    W: float
    log_jacobian: float

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @model_validator(mode="before")
    @classmethod
    def coerce_arrays(cls, data):
        if isinstance(data, dict):
            data = dict(data)
            for key in ("m_x", "Cyx_white"):
                if key in data:
                    data[key] = np.array(data[key], dtype=np.float64).reshape(-1)
            if "Cxx_inv_sqrt" in data:
                data["Cxx_inv_sqrt"] = np.array(data["Cxx_inv_sqrt"], dtype=np.float64)
            # log_jacobian is always derived from W
            if "W" in data and data["W"] > 0:
                data["W"] = float(data["W"])
                data["log_jacobian"] = float(np.log(data["W"]))
        return data

    @model_validator(mode="after")
    def check_transform(self) -> "WhiteningTransform":
        D = self.m_x.size
        if self.Cxx_inv_sqrt.shape != (D, D) or self.Cyx_white.size != D:
            raise ValueError(f"Whitening shapes disagree: m_x {self.m_x.shape}, "
                             f"Cxx_inv_sqrt {self.Cxx_inv_sqrt.shape}, Cyx_white {self.Cyx_white.shape}")
        if not self.W > 0:
            raise ValueError(f"Whitening scale W must be positive, got {self.W}")
        if self.log_jacobian != np.log(self.W):
            raise ValueError("log_jacobian must equal log(W)")
        return self

    @property
    def dim(self) -> int:
        return self.m_x.size

    @classmethod
    def identity(cls, D: int) -> "WhiteningTransform":
        return cls(m_x=np.zeros(D), m_y=0.0, Cxx_inv_sqrt=np.eye(D), Cyx_white=np.zeros(D), W=1.0)


def _inverse_sqrt(matrix: np.ndarray, name: str) -> np.ndarray:
    eigenvalues, eigenvectors = eigh(matrix)
    smallest = float(eigenvalues.min())
    if not smallest > 0:
        raise NumericError(f"Covariance {name} is degenerate: eigenvalue {smallest:.3e}")
    return (eigenvectors / np.sqrt(eigenvalues)) @ eigenvectors.T


def fit_whitening(X: np.ndarray, y: np.ndarray) -> WhiteningTransform:
    """
    Estimate the conditional whitening transform from (context, pixel) pairs.

    A ridge of 1e-8 trace(C_xx) / D is added to C_xx before inversion.

    Args:
        X: Contexts, shape (M, D)
        y: Pixels, shape (M,)

    Raises:
        DomainError: If fewer than D + 2 pairs are given
        NumericError: If a covariance is degenerate even after the ridge
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DomainError(f"Expected contexts (M, D) and M pixels, got {X.shape} and {y.shape}")
    M, D = X.shape
    if M < D + 2:
        raise DomainError(f"fit_whitening needs at least {D + 2} pairs, got {M}")

    m_x = X.mean(axis=0)
    m_y = float(y.mean())
    Xc = X - m_x
    yc = y - m_y
    Cxx = Xc.T @ Xc / M
    Cyx = yc @ Xc / M
    Cyy = float(yc @ yc / M)
    ridge = WHITENING_RIDGE * np.trace(Cxx) / D
    Cxx_inv_sqrt = _inverse_sqrt(Cxx + ridge * np.eye(D), "C_xx")
    Cyx_white = Cyx @ Cxx_inv_sqrt
    residual_variance = Cyy - float(Cyx_white @ Cyx_white)
    if not residual_variance > 0:
        raise NumericError(f"Conditional variance of the pixel is degenerate: eigenvalue {residual_variance:.3e}")
    W = residual_variance ** -0.5
    logger.debug(f"Fitted whitening on {M} pairs (D={D}), W={W:.4g}")
    return WhiteningTransform(m_x=m_x, m_y=m_y, Cxx_inv_sqrt=Cxx_inv_sqrt, Cyx_white=Cyx_white, W=W)


def precondition(
    wt: WhiteningTransform,
    ctx: np.ndarray,
    y: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Apply the whitening maps to contexts (..., D) and, if given, pixels (...).

    Returns:
        (ctx_hat, y_hat); y_hat is None when y is None
    """
    ctx = np.asarray(ctx, dtype=np.float64)
    if ctx.shape[-1] != wt.dim:
        raise DomainError(f"Context has size {ctx.shape[-1]}, whitening expects {wt.dim}")
    ctx_hat = (ctx - wt.m_x) @ wt.Cxx_inv_sqrt.T
    if y is None:
        return ctx_hat, None
    y = np.asarray(y, dtype=np.float64)
    if y.shape != ctx.shape[:-1]:
        raise DomainError(f"Pixels have shape {y.shape}, contexts {ctx.shape}")
    y_hat = wt.W * (y - ctx_hat @ wt.Cyx_white - wt.m_y)
    return ctx_hat, y_hat


def unprecondition(wt: WhiteningTransform, ctx_hat: np.ndarray, y_hat: np.ndarray) -> np.ndarray:
    """Inverse of the pixel map: y = y_hat / W + C_yx C_xx^-1/2 x_hat + m_y."""
    return np.asarray(y_hat) / wt.W + np.asarray(ctx_hat) @ wt.Cyx_white + wt.m_y
