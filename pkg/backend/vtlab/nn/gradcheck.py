"""Central finite-difference gradient checking."""
from typing import Callable, Optional

import numpy as np

from .mlp import Mlp
from .tensor import Tensor

FD_STEP = 1e-5


def numerical_gradient(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = FD_STEP) -> Tensor:
    """Central differences of the scalar function ``f`` at the flat point ``x``."""
    x = np.array(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        saved = x[i]
        x[i] = saved + h
        f_plus = f(x)
        x[i] = saved - h
        f_minus = f(x)
        x[i] = saved
        grad[i] = (f_plus - f_minus) / (2.0 * h)
    return grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    a = np.ravel(analytic)
    n = np.ravel(numeric)
    denom = max(np.linalg.norm(a), np.linalg.norm(n), 1e-12)
    return float(np.linalg.norm(a - n) / denom)


def check_mlp_gradients(
    net: Mlp,
    x: np.ndarray,
    upstream: Optional[np.ndarray] = None,
    h: float = FD_STEP,
) -> float:
    """
    Largest per-tensor relative error between ``backward`` and central differences of
    sum(upstream * forward(x)), covering every parameter tensor and the input.
    """
    x = np.asarray(x, dtype=np.float64)
    out = net.forward(x)
    if upstream is None:
        upstream = np.ones_like(out)
    grads, input_grad = net.backward(x, upstream)

    def objective_params(flat):
        return float(np.sum(upstream * net.with_flat(flat).forward(x)))

    numeric_flat = numerical_gradient(objective_params, net.get_flat(), h)
    numeric = net.grads_from_flat(numeric_flat).as_list()
    worst = max(relative_error(a, n) for a, n in zip(grads.as_list(), numeric))

    def objective_input(flat_x):
        return float(np.sum(upstream * net.forward(flat_x.reshape(x.shape))))

    numeric_input = numerical_gradient(objective_input, x.ravel(), h).reshape(x.shape)
    return max(worst, relative_error(input_grad, numeric_input))
