"""Action-norm constraint: engine rewards shrink as the action norm grows past a threshold."""
from typing import Optional

import numpy as np

from ..config import AncConfig
from ..error_handling import RejectedInputError


def anc_shape(reward: float, action, cfg: AncConfig) -> float:
    """r / (1 + rho * max(||a|| - mu, 0))."""
    if not np.isfinite(reward):
        raise RejectedInputError(f"reward must be finite, got {reward}")
    norm = float(np.linalg.norm(np.asarray(getattr(action, "weights", action), dtype=np.float64)))
    return float(reward) / (1.0 + cfg.rho * max(norm - cfg.mu, 0.0))


def anc_shape_batch(rewards: np.ndarray, actions: np.ndarray, cfg: Optional[AncConfig]) -> np.ndarray:
    """Row-wise ``anc_shape``; ``cfg`` None or disabled leaves rewards untouched."""
    rewards = np.asarray(rewards, dtype=np.float64)
    if cfg is None or not cfg.enabled:
        return rewards.copy()
    norms = np.linalg.norm(np.atleast_2d(actions), axis=1)
    return rewards / (1.0 + cfg.rho * np.maximum(norms - cfg.mu, 0.0))
