"""
Trajectories of the customer-view MDP under the joint policy.

A trajectory starts with a fresh customer and an engine action drawn from the engine head.
Buy ends it, a page turn past MaxIndex ends it, Leave brings the next fresh customer in
(with a new engine action) and the step cap truncates it.
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from ..error_handling import RejectedInputError
from ..market.domain import (
    CustomerAction,
    CustomerSampler,
    CustomerState,
    EngineAction,
    PageIndex,
    ProfileBatch,
    sample_choices,
)
from ..utils.seeding import STREAM_ROLLOUT, run_sharded
from .policy import JointData, JointPolicy

DEFAULT_STEP_CAP = 200


@dataclass
class MailTrajectories:
    """Flat per-step arrays ordered by (trajectory, step)."""
    trajectory: np.ndarray
    step: np.ndarray
    profiles: ProfileBatch
    actions: np.ndarray
    pages: np.ndarray
    choices: np.ndarray
    fresh: np.ndarray
    terminal: np.ndarray
    truncated: np.ndarray
    max_index: int

    def __len__(self) -> int:
        return int(self.trajectory.size)

    @property
    def n_trajectories(self) -> int:
        return int(np.unique(self.trajectory).size)

    def lengths(self) -> np.ndarray:
        return np.bincount(self.trajectory)

    def segment_ends(self) -> np.ndarray:
        return self.terminal | self.truncated

    def customer_inputs(self, joint: JointPolicy) -> np.ndarray:
        return joint.customer_inputs(self.profiles, self.actions, self.pages)

    def joint_data(self, joint: JointPolicy) -> JointData:
        return JointData(self.customer_inputs(joint), self.choices, self.profiles.encode(), self.actions, self.fresh)

    def pairs(self, index: int) -> List[Tuple[CustomerState, CustomerAction]]:
        """The (s^c, a^c) pairs of one trajectory."""
        rows = np.flatnonzero(self.trajectory == index)
        return [
            (
                CustomerState(
                    self.profiles.profile(int(r)),
                    EngineAction(tuple(float(v) for v in self.actions[r])),
                    PageIndex(int(self.pages[r])),
                ),
                CustomerAction(int(self.choices[r])),
            )
            for r in rows
        ]


def _rollout_shard(n, rng, joint: JointPolicy, sampler: CustomerSampler, max_index: int, step_cap: int):
    profiles = sampler.sample(n, rng)
    actions = joint.engine_actions(profiles, rng)
    pages = np.zeros(n, dtype=np.int64)
    fresh = np.ones(n, dtype=bool)
    active = np.arange(n)
    steps = np.zeros(n, dtype=np.int64)
    records = []

    while active.size:
        batch = profiles.take(active)
        probs = joint.probabilities(batch, actions[active], pages[active])
        choices = sample_choices(probs, rng)
        buy = choices == int(CustomerAction.BUY)
        turn = choices == int(CustomerAction.TURN_PAGE)
        leave = choices == int(CustomerAction.LEAVE)
        overflow = turn & (pages[active] + 1 > max_index)
        terminal = buy | overflow
        steps[active] += 1
        truncated = ~terminal & (steps[active] >= step_cap)
        records.append((active.copy(), steps[active] - 1, batch, actions[active].copy(), pages[active].copy(),
                        choices, fresh[active].copy(), terminal, truncated))

        pages[active[turn]] += 1
        fresh[active] = False
        movers = active[leave & ~truncated]
        if movers.size:
            newcomers = sampler.sample(movers.size, rng)
            profiles = _replace_rows(profiles, movers, newcomers)
            actions[movers] = joint.engine_actions(newcomers, rng)
            pages[movers] = 0
            fresh[movers] = True
        active = active[~(terminal | truncated)]

    trajectory = np.concatenate([r[0] for r in records])
    step = np.concatenate([r[1] for r in records])
    order = np.lexsort((step, trajectory))
    return (
        trajectory[order],
        step[order],
        ProfileBatch.concat([r[2] for r in records]).take(order),
        np.concatenate([r[3] for r in records], axis=0)[order],
        np.concatenate([r[4] for r in records])[order],
        np.concatenate([r[5] for r in records])[order],
        np.concatenate([r[6] for r in records])[order],
        np.concatenate([r[7] for r in records])[order],
        np.concatenate([r[8] for r in records])[order],
        n,
    )


def _replace_rows(profiles: ProfileBatch, rows: np.ndarray, newcomers: ProfileBatch) -> ProfileBatch:
    category = profiles.category.copy()
    power = profiles.power.copy()
    level = profiles.high_level.copy()
    request = profiles.request.copy()
    category[rows] = newcomers.category
    power[rows] = newcomers.power
    level[rows] = newcomers.high_level
    request[rows] = newcomers.request
    return ProfileBatch(category, power, level, request)


def mail_rollout(
    joint: JointPolicy,
    sampler: CustomerSampler,
    trajectories: int,
    seed: int,
    max_index: int,
    step_cap: int = DEFAULT_STEP_CAP,
    threads: int = 1,
) -> MailTrajectories:
    """Generate ``trajectories`` customer-view trajectories in lockstep, sharded by trajectory."""
    if trajectories < 1:
        raise RejectedInputError(f"trajectory count must be at least 1, got {trajectories}")

    def work(n, rng):
        return _rollout_shard(n, rng, joint, sampler, max_index, step_cap)

    shards = run_sharded(work, trajectories, seed, STREAM_ROLLOUT, threads=threads)
    offset = 0
    parts = []
    for shard in shards:
        parts.append((shard[0] + offset,) + shard[1:9])
        offset += shard[9]
    return MailTrajectories(
        np.concatenate([p[0] for p in parts]),
        np.concatenate([p[1] for p in parts]),
        ProfileBatch.concat([p[2] for p in parts]),
        np.concatenate([p[3] for p in parts], axis=0),
        np.concatenate([p[4] for p in parts]),
        np.concatenate([p[5] for p in parts]),
        np.concatenate([p[6] for p in parts]),
        np.concatenate([p[7] for p in parts]),
        np.concatenate([p[8] for p in parts]),
        max_index,
    )
