"""Loss functions returning the scalar loss together with its gradient with respect to the network output."""
from typing import Tuple

import numpy as np
from scipy import special

from ..error_handling import RejectedInputError
from .tensor import Tensor

CLAMP = 1e-8


def clamp_probability(p: np.ndarray, eps: float = CLAMP) -> Tensor:
    return np.clip(p, eps, 1.0 - eps)


def bernoulli_objective(real_out: np.ndarray, fake_out: np.ndarray, eps: float = CLAMP) -> float:
    """E[log D(real)] + E[log(1 - D(fake))] with probabilities clamped before the logarithm."""
    real_out = np.asarray(real_out, dtype=np.float64).reshape(-1)
    fake_out = np.asarray(fake_out, dtype=np.float64).reshape(-1)
    if real_out.size == 0 or fake_out.size == 0:
        raise RejectedInputError("discriminator batches must be nonempty")
    return float(
        np.mean(np.log(clamp_probability(real_out, eps)))
        + np.mean(np.log(1.0 - clamp_probability(fake_out, eps)))
    )


def bernoulli_loss_grads(
    real_out: np.ndarray, fake_out: np.ndarray, eps: float = CLAMP
) -> Tuple[float, Tensor, Tensor]:
    """
    Negated Bernoulli objective and its gradients with respect to the (n, 1) sigmoid outputs
    of both batches. Inside the clamp band the derivative is taken as zero.
    """
    real_out = np.asarray(real_out, dtype=np.float64)
    fake_out = np.asarray(fake_out, dtype=np.float64)
    loss = -bernoulli_objective(real_out, fake_out, eps)
    pr = clamp_probability(real_out, eps)
    pf = clamp_probability(fake_out, eps)
    grad_real = np.where(pr == real_out, -1.0 / (pr * real_out.shape[0]), 0.0)
    grad_fake = np.where(pf == fake_out, 1.0 / ((1.0 - pf) * fake_out.shape[0]), 0.0)
    return loss, grad_real, grad_fake


def cross_entropy_logits(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, Tensor]:
    """Mean categorical cross-entropy and its gradient with respect to the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = logits.shape[0]
    if n == 0:
        raise RejectedInputError("cross-entropy needs a nonempty batch")
    log_p = logits - special.logsumexp(logits, axis=1, keepdims=True)
    loss = float(-np.mean(log_p[np.arange(n), labels]))
    grad = np.exp(log_p)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def mse(pred: np.ndarray, target: np.ndarray, weight: float = 1.0) -> Tuple[float, Tensor]:
    """weight * mean over rows of the squared L2 error, and its gradient."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    n = pred.shape[0]
    if n == 0:
        return 0.0, np.zeros_like(pred)
    diff = pred - target
    loss = weight * float(np.sum(diff * diff)) / n
    return loss, (2.0 * weight / n) * diff
