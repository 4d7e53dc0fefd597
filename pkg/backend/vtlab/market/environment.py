"""
Engine-view environment assembled from a customer sampler and a customer policy.

One engine step serves one customer: the engine's action is held while the customer pages,
and the step ends when the session does. The reward is 1 when the customer bought; ``info``
carries the number of page views so R2P stays computable.
"""
from dataclasses import dataclass, field
from typing import Dict, NamedTuple, Tuple

import numpy as np

from ..error_handling import RejectedInputError
from .dataset import Dataset
from .domain import (
    DEFAULT_MAX_INDEX,
    CustomerAction,
    CustomerPolicy,
    CustomerProfile,
    CustomerSampler,
    EnginePolicy,
    ProfileBatch,
)
from .rollout import rollout_sessions, simulate_sessions


class EngineStep(NamedTuple):
    next_profile: CustomerProfile
    reward: float
    done: bool
    info: Dict[str, int]


class SessionOutcome(NamedTuple):
    rewards: np.ndarray
    page_views: np.ndarray


@dataclass
class VirtualEnvironment:
    sampler: CustomerSampler
    customer: CustomerPolicy
    max_index: int = DEFAULT_MAX_INDEX
    name: str = field(default="virtual")

    def reset(self, rng: np.random.Generator) -> CustomerProfile:
        return self.sampler.sample(1, rng).profile(0)

    def step(self, profile: CustomerProfile, action, rng: np.random.Generator) -> EngineStep:
        action = np.asarray(action, dtype=np.float64).reshape(1, -1)
        outcome = self.play(ProfileBatch.from_profiles([profile]), action, rng)
        next_profile = self.reset(rng)
        return EngineStep(
            next_profile,
            float(outcome.rewards[0]),
            True,
            {"page_views": int(outcome.page_views[0])},
        )

    def play(self, profiles: ProfileBatch, actions: np.ndarray, rng: np.random.Generator) -> SessionOutcome:
        """Batched ``step``: one session per row, returning purchase flags and page-view counts."""
        n = len(profiles)
        if np.shape(actions)[0] != n:
            raise RejectedInputError(f"{np.shape(actions)[0]} actions for {n} profiles")
        session, _, choice, _ = simulate_sessions(self.customer, profiles, actions, rng, self.max_index)
        page_views = np.bincount(session, minlength=n)
        bought = np.bincount(session, weights=(choice == int(CustomerAction.BUY)), minlength=n)
        return SessionOutcome(bought.astype(np.float64), page_views.astype(np.int64))

    def sample_profiles(self, n: int, rng: np.random.Generator) -> ProfileBatch:
        return self.sampler.sample(n, rng)

    def run_sessions(self, engine: EnginePolicy, count: int, seed: int, threads: int = 1) -> Dataset:
        return rollout_sessions(engine, self.customer, self.sampler, count, seed,
                                max_index=self.max_index, threads=threads)

    def r2p(self, engine: EnginePolicy, count: int, seed: int, threads: int = 1) -> float:
        dataset = self.run_sessions(engine, count, seed, threads)
        return float(dataset.rewards().sum()) / dataset.n_records


def r2p_of(outcome: SessionOutcome) -> Tuple[float, int]:
    views = int(outcome.page_views.sum())
    return (float(outcome.rewards.sum()) / views if views else 0.0), views
