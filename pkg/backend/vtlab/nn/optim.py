"""
First-order optimizers over lists of parameter arrays.
"""
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..error_handling import NumericFaultError, RejectedInputError
from .mlp import Mlp, MlpGrads
from .tensor import Tensor

OPTIMIZER_KINDS = ("sgd", "adam")


@dataclass
class OptimizerState:
    kind: str = "adam"
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: List[Tensor] = field(default_factory=list)
    v: List[Tensor] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in OPTIMIZER_KINDS:
            raise RejectedInputError(f"unknown optimizer kind '{self.kind}'")
        if self.lr <= 0:
            raise RejectedInputError(f"learning rate must be positive, got {self.lr}")


def make_optimizer(params: Sequence[np.ndarray], kind: str = "adam", lr: float = 1e-3, **kwargs) -> OptimizerState:
    """Fresh optimizer whose accumulators mirror ``params``."""
    state = OptimizerState(kind=kind, lr=lr, **kwargs)
    if kind == "adam":
        state.m = [np.zeros_like(p, dtype=np.float64) for p in params]
        state.v = [np.zeros_like(p, dtype=np.float64) for p in params]
    return state


def optimize_step(
    state: OptimizerState,
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    lr: Optional[float] = None,
) -> List[Tensor]:
    """
    One descent step. Returns new parameter arrays; ``state`` advances in place.

    ``lr`` overrides the state's learning rate for this step only (used for decay schedules).
    """
    if len(params) != len(grads):
        raise RejectedInputError(f"{len(params)} parameters but {len(grads)} gradients")
    for index, (p, g) in enumerate(zip(params, grads)):
        if np.shape(p) != np.shape(g):
            raise RejectedInputError(
                f"gradient {index} has shape {np.shape(g)}, parameter has {np.shape(p)}"
            )
        if not np.isfinite(g).all():
            raise NumericFaultError(f"non-finite gradient for parameter {index}")
    rate = state.lr if lr is None else lr
    state.step += 1

    if state.kind == "sgd":
        return [np.asarray(p, dtype=np.float64) - rate * np.asarray(g) for p, g in zip(params, grads)]

    if not state.m:
        state.m = [np.zeros_like(p, dtype=np.float64) for p in params]
        state.v = [np.zeros_like(p, dtype=np.float64) for p in params]
    correction1 = 1.0 - state.beta1 ** state.step
    correction2 = 1.0 - state.beta2 ** state.step
    updated = []
    for i, (p, g) in enumerate(zip(params, grads)):
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * (g * g)
        m_hat = state.m[i] / correction1
        v_hat = state.v[i] / correction2
        updated.append(np.asarray(p, dtype=np.float64) - rate * m_hat / (np.sqrt(v_hat) + state.eps))
    return updated


def global_norm(grads: Sequence[np.ndarray]) -> float:
    return float(np.sqrt(sum(float(np.sum(g * g)) for g in grads)))


def clip_by_global_norm(grads: Sequence[np.ndarray], max_norm: float) -> Tuple[List[Tensor], float]:
    """Rescale ``grads`` so their joint L2 norm is at most ``max_norm``; returns the pre-clip norm."""
    norm = global_norm(grads)
    if norm > max_norm > 0:
        scale = max_norm / norm
        return [g * scale for g in grads], norm
    return [np.asarray(g) for g in grads], norm


def apply_gradients(net: Mlp, state: OptimizerState, grads: MlpGrads, lr: Optional[float] = None) -> Mlp:
    """Optimizer step on an ``Mlp``; returns the updated network."""
    return net.with_parameters(optimize_step(state, net.parameters(), grads.as_list(), lr=lr))


def linear_decay(base_lr: float, step: int, total_steps: int, floor: float = 0.1) -> float:
    """Learning rate decayed linearly from ``base_lr`` to ``floor * base_lr`` over ``total_steps``."""
    if total_steps <= 1:
        return base_lr
    frac = min(step / (total_steps - 1), 1.0)
    return base_lr * (1.0 - (1.0 - floor) * frac)
