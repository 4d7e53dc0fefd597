"""
Trust-region policy optimization.

``trpo_step`` works with any policy object offering the trust-region interface:
``get_flat``/``with_flat`` for the parameter vector, ``log_prob(data)``,
``log_prob_grad(data, weights)``, ``kl(old, data)`` (mean KL from the old policy) and
``fisher_vector_product(data, v)`` (mean Fisher matrix times ``v``). Engine-only Gaussian
policies and the joint customer/engine policy both implement it.
"""
from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

from ..config import TrpoConfig
from ..core.logging_config import LogCategory, get_logger
from ..error_handling import NumericFaultError, RejectedInputError
from ..utils.seeding import STREAM_TRAINING, make_rng
from .cg import conjugate_gradient
from .value import ValueFunction

logger = get_logger(__name__, LogCategory.TRAINING)

KL_SLACK = 1.5


def compute_gae(
    rewards: np.ndarray,
    values: np.ndarray,
    next_values: np.ndarray,
    terminals: np.ndarray,
    segment_ends: np.ndarray,
    gamma: float,
    lam: float,
):
    """
    Generalized advantage estimates over concatenated trajectory segments.

    ``terminals`` marks steps after which the value is zero; ``segment_ends`` marks the last
    step of each stored segment (terminal or truncated). Truncated steps bootstrap from
    ``next_values``. Returns (advantages, value targets).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    next_values = np.asarray(next_values, dtype=np.float64)
    terminals = np.asarray(terminals, dtype=bool)
    segment_ends = np.asarray(segment_ends, dtype=bool) | terminals
    deltas = rewards + gamma * np.where(terminals, 0.0, next_values) - values
    advantages = np.zeros_like(rewards)
    running = 0.0
    for t in range(rewards.size - 1, -1, -1):
        if segment_ends[t]:
            running = 0.0
        running = deltas[t] + gamma * lam * running
        advantages[t] = running
    return advantages, advantages + values


def standardize(advantages: np.ndarray) -> np.ndarray:
    advantages = np.asarray(advantages, dtype=np.float64)
    centered = advantages - advantages.mean()
    std = centered.std()
    return centered / std if std > 1e-12 else centered


@dataclass
class TrpoBatch:
    data: Any
    advantages: np.ndarray
    returns: Optional[np.ndarray] = None
    value_inputs: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return int(np.asarray(self.advantages).shape[0])


@dataclass
class TrpoDiagnostics:
    surrogate_improvement: float = 0.0
    kl: float = 0.0
    accepted: bool = False
    backtracks: int = 0
    grad_norm: float = 0.0
    value_loss_before: float = float("nan")
    value_loss_after: float = float("nan")


def surrogate(policy, batch: TrpoBatch, old_log_prob: np.ndarray) -> float:
    ratio = np.exp(policy.log_prob(batch.data) - old_log_prob)
    return float(np.mean(ratio * batch.advantages))


def trpo_step(
    policy,
    batch: TrpoBatch,
    cfg: TrpoConfig,
    value: Optional[ValueFunction] = None,
    rng: Optional[np.random.Generator] = None,
):
    """
    One natural-gradient step with backtracking line search, then a value-function fit.

    A candidate is accepted when its mean KL from the current policy is at most 1.5 * max_kl
    and the sampled surrogate improves; otherwise the policy is returned unchanged.
    Returns (policy, TrpoDiagnostics).
    """
    n = len(batch)
    if n == 0:
        raise RejectedInputError("trust-region step needs a nonempty batch")
    diag = TrpoDiagnostics()
    advantages = np.asarray(batch.advantages, dtype=np.float64)
    old_flat = policy.get_flat()
    old_log_prob = policy.log_prob(batch.data)
    base = float(np.mean(advantages))

    grad = policy.log_prob_grad(batch.data, advantages / n)
    if not np.isfinite(grad).all():
        raise NumericFaultError("non-finite policy gradient")
    diag.grad_norm = float(np.linalg.norm(grad))

    new_policy = policy
    if diag.grad_norm > 0.0:
        def fvp(v):
            return policy.fisher_vector_product(batch.data, v) + cfg.cg_damping * v

        direction = conjugate_gradient(fvp, grad, iters=cfg.cg_iters)
        curvature = float(direction @ fvp(direction))
        if not np.isfinite(curvature):
            raise NumericFaultError("non-finite curvature along the search direction")
        if curvature > 0.0:
            full_step = direction * np.sqrt(2.0 * cfg.max_kl / curvature)
            for attempt in range(cfg.max_backtracks):
                fraction = cfg.backtrack_factor ** attempt
                candidate = policy.with_flat(old_flat + fraction * full_step)
                kl = candidate.kl(policy, batch.data)
                improvement = surrogate(candidate, batch, old_log_prob) - base
                if np.isfinite(kl) and np.isfinite(improvement) and kl <= KL_SLACK * cfg.max_kl and improvement > 0.0:
                    new_policy = candidate
                    diag.accepted = True
                    diag.backtracks = attempt
                    diag.kl = float(kl)
                    diag.surrogate_improvement = float(improvement)
                    break
            else:
                diag.backtracks = cfg.max_backtracks
                logger.training_debug("line search rejected every candidate, keeping the policy", operation="trpo_step")

    if value is not None and batch.returns is not None and batch.value_inputs is not None:
        rng = rng if rng is not None else make_rng(0, STREAM_TRAINING)
        diag.value_loss_before, diag.value_loss_after = value.fit(
            batch.value_inputs, batch.returns, cfg.value_epochs, cfg.value_batch, rng
        )
    return new_policy, diag
