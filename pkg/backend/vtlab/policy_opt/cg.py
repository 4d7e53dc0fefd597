"""Conjugate gradient for the natural-gradient direction."""
from typing import Callable

import numpy as np

from ..error_handling import NumericFaultError
from ..nn.tensor import Tensor


def conjugate_gradient(
    avp: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    iters: int = 10,
    tol: float = 1e-10,
) -> Tensor:
    """
    Approximately solve A x = b given only the product ``avp(v) = A v``.

    Stops when the residual norm drops to ``tol`` or after ``iters`` iterations.
    """
    b = np.asarray(b, dtype=np.float64)
    x = np.zeros_like(b)
    r = b.copy()
    p = b.copy()
    rr = float(r @ r)
    for _ in range(iters):
        if np.sqrt(rr) <= tol:
            break
        ap = np.asarray(avp(p), dtype=np.float64)
        curvature = float(p @ ap)
        if not np.isfinite(curvature):
            raise NumericFaultError("non-finite curvature in conjugate gradient")
        if curvature <= 0.0:
            break
        alpha = rr / curvature
        x += alpha * p
        r -= alpha * ap
        rr_new = float(r @ r)
        p = r + (rr_new / rr) * p
        rr = rr_new
    if not np.isfinite(x).all():
        raise NumericFaultError("conjugate gradient produced a non-finite solution")
    return x
