"""
Optimizers used for training: SGD with momentum and L-BFGS with a strong
Wolfe line search. Both work on flat float64 parameter vectors.
"""

import logging
import warnings
from collections import deque
from typing import Callable, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy.optimize import line_search

from misc.constants import LOGGER_NAME
from misc.exceptions import DomainError, NumericError
from schema.training import LbfgsConfig

logger = logging.getLogger(f"{LOGGER_NAME}.training.optim")

Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]


class SgdState(BaseModel):
    """Heavy-ball state: velocity <- momentum * velocity - learning_rate * grads."""
    velocity: np.ndarray
    momentum: float = Field(default=0.9, ge=0, lt=1)
    learning_rate: float = Field(default=1.0, gt=0)

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @classmethod
    def zeros(cls, size: int, momentum: float, learning_rate: float) -> "SgdState":
        return cls(velocity=np.zeros(size), momentum=momentum, learning_rate=learning_rate)


def sgd_step(state: SgdState, params: np.ndarray, grads: np.ndarray) -> Tuple[np.ndarray, SgdState]:
    """
    One momentum step.

    Returns:
        (updated params, updated state)

    Raises:
        DomainError: If params, grads and velocity shapes disagree
    """
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape or state.velocity.shape != params.shape:
        raise DomainError(
            f"Shape mismatch: params {params.shape}, grads {grads.shape}, velocity {state.velocity.shape}"
        )
    velocity = state.momentum * state.velocity - state.learning_rate * grads
    return params + velocity, state.model_copy(update={"velocity": velocity})


class LbfgsResult(BaseModel):
    """Outcome of lbfgs_minimize."""
    params: np.ndarray
    value: float
    iterations: int
    converged: bool
    line_search_failed: bool = False
    history: List[float] = []

    model_config = ConfigDict(arbitrary_types_allowed=True)


class _CachedObjective:
    """Evaluates (value, gradient) once per point; the line search asks for them separately."""

    def __init__(self, objective: Objective):
        self.objective = objective
        self.evaluations = 0
        self._x = None
        self._result = None

    def __call__(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        if self._x is None or not np.array_equal(x, self._x):
            value, grad = self.objective(x)
            self._x = np.array(x, copy=True)
            self._result = (float(value), np.asarray(grad, dtype=np.float64))
            self.evaluations += 1
        return self._result

    def value(self, x: np.ndarray) -> float:
        return self(x)[0]

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self(x)[1]


def _two_loop(grad: np.ndarray, pairs) -> np.ndarray:
    """Approximate inverse-Hessian times gradient from the stored (s, y, rho) pairs."""
    q = grad.copy()
    coefficients = []
    for s, y, rho in reversed(pairs):
        a = rho * (s @ q)
        q -= a * y
        coefficients.append(a)
    if pairs:
        s, y, _ = pairs[-1]
        q *= (s @ y) / (y @ y)
    for (s, y, rho), a in zip(pairs, reversed(coefficients)):
        b = rho * (y @ q)
        q += s * (a - b)
    return q


def lbfgs_minimize(
    objective: Objective,
    initial: np.ndarray,
    cfg: Optional[LbfgsConfig] = None,
    callback: Optional[Callable[[int, np.ndarray, float], None]] = None,
) -> LbfgsResult:
    """
    Minimize a smooth objective with L-BFGS.

    Stops when the infinity norm of the gradient drops to cfg.gradient_tolerance
    or after cfg.max_iterations accepted steps. Accepted values never increase.
    If the line search fails twice in a row (the second time from a steepest
    descent direction), the best point so far is returned with
    line_search_failed set.

    Args:
        objective: Function returning (value, gradient)
        initial: Starting point
        cfg: Optimizer settings
        callback: Called as callback(iteration, params, value) after every accepted step

    Returns:
        LbfgsResult
    """
    cfg = cfg or LbfgsConfig()
    f_eval = _CachedObjective(objective)
    x = np.array(initial, dtype=np.float64, copy=True)
    f, g = f_eval(x)
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise NumericError(f"Objective is not finite at the initial point (value {f})")

    history = [f]
    if np.max(np.abs(g), initial=0.0) <= cfg.gradient_tolerance:
        return LbfgsResult(params=x, value=f, iterations=0, converged=True, history=history)

    pairs = deque(maxlen=cfg.memory)
    old_f = f + np.linalg.norm(g) / 2
    iterations = 0
    converged = False
    failed = False

    while iterations < cfg.max_iterations:
        direction = -_two_loop(g, list(pairs))
        if g @ direction >= 0:
            pairs.clear()
            direction = -g
        with warnings.catch_warnings():
            # scipy signals a failed search with a RuntimeWarning subclass
            warnings.simplefilter("ignore", RuntimeWarning)
            step = line_search(
                f_eval.value, f_eval.grad, x, direction, gfk=g, old_fval=f, old_old_fval=old_f,
                c1=cfg.c1, c2=cfg.c2, maxiter=cfg.max_backtracks,
            )[0]
        x_new = x + step * direction if step is not None else None
        f_new, g_new = f_eval(x_new) if x_new is not None else (np.inf, None)
        if step is None or not np.isfinite(f_new) or f_new > f:
            if pairs:
                logger.debug(f"Line search failed at iteration {iterations}; resetting memory")
                pairs.clear()
                old_f = f + np.linalg.norm(g) / 2
                continue
            failed = True
            break

        s = x_new - x
        y = g_new - g
        curvature = s @ y
        if curvature > 1e-10 * (y @ y):
            pairs.append((s, y, 1.0 / curvature))
        old_f, f = f, f_new
        x, g = x_new, g_new
        iterations += 1
        history.append(f)
        if callback is not None:
            callback(iterations, x, f)
        if np.max(np.abs(g)) <= cfg.gradient_tolerance:
            converged = True
            break

    logger.debug(
        f"L-BFGS finished after {iterations} iterations ({f_eval.evaluations} evaluations), "
        f"value {f:.6g}, converged={converged}, line_search_failed={failed}"
    )
    return LbfgsResult(
        params=x, value=f, iterations=iterations, converged=converged,
        line_search_failed=failed, history=history,
    )
