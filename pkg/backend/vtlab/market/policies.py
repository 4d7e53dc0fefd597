"""Simple engine policies, customer policies and customer samplers."""
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..error_handling import InsufficientDataError, RejectedInputError
from ..nn.tensor import Tensor, as_tensor
from .domain import N_CUSTOMER_ACTIONS, CustomerAction, CustomerProfile, ProfileBatch


@dataclass(frozen=True)
class UniformLoggingPolicy:
    """Historical random engine policy: each weight uniform on [low, high]."""
    engine_dim: int
    low: float = -0.5
    high: float = 0.5
    policy_id: str = "uniform-logging"

    def act(self, profiles: ProfileBatch, rng: np.random.Generator) -> Tensor:
        return rng.uniform(self.low, self.high, size=(len(profiles), self.engine_dim))


@dataclass(frozen=True)
class ConstantEnginePolicy:
    """Same action for every customer."""
    action: Sequence[float]
    policy_id: str = "constant"

    def act(self, profiles: ProfileBatch, rng: np.random.Generator) -> Tensor:
        return np.tile(np.asarray(self.action, dtype=np.float64), (len(profiles), 1))


class FixedCustomerPolicy:
    """State-independent customer behavior."""

    def __init__(self, probs: Sequence[float]):
        probs = as_tensor(probs, name="customer probabilities", shape=(N_CUSTOMER_ACTIONS,))
        if abs(probs.sum() - 1.0) > 1e-6 or (probs < 0).any():
            raise RejectedInputError(f"customer probabilities {probs.tolist()} are not a distribution")
        self.probs = probs

    @classmethod
    def always(cls, action: CustomerAction) -> "FixedCustomerPolicy":
        probs = np.zeros(N_CUSTOMER_ACTIONS)
        probs[int(action)] = 1.0
        return cls(probs)

    @classmethod
    def uniform(cls) -> "FixedCustomerPolicy":
        return cls(np.full(N_CUSTOMER_ACTIONS, 1.0 / N_CUSTOMER_ACTIONS))

    def probabilities(self, profiles: ProfileBatch, actions: np.ndarray, pages: np.ndarray) -> Tensor:
        return np.tile(self.probs, (len(profiles), 1))


class PointMassSampler:
    """Always the same customer."""

    def __init__(self, profile: CustomerProfile):
        self.profile = profile

    def sample(self, n: int, rng: np.random.Generator) -> ProfileBatch:
        return ProfileBatch.repeat(self.profile, n)


class EmpiricalSampler:
    """Resamples logged customers uniformly with replacement."""

    def __init__(self, profiles: ProfileBatch):
        if len(profiles) == 0:
            raise InsufficientDataError("empirical sampler needs at least one logged customer")
        self.profiles = profiles

    @classmethod
    def from_dataset(cls, dataset) -> "EmpiricalSampler":
        return cls(dataset.session_profiles())

    def sample(self, n: int, rng: np.random.Generator) -> ProfileBatch:
        return self.profiles.take(rng.integers(0, len(self.profiles), size=n))
