"""
Session rollouts.

Sessions run in lockstep inside a shard: every active customer sees its current page, the
customer policy is evaluated once for the whole active set and one uniform per customer picks
the action. Shards draw from ``make_rng(seed, STREAM_ROLLOUT, shard)``; session ids follow shard
order, so any thread count gives the same dataset.
"""
from typing import Callable, Optional

import numpy as np

from ..core.logging_config import LogCategory, get_logger
from ..error_handling import RejectedInputError
from ..utils.seeding import SHARD_SIZE, STREAM_ROLLOUT, run_sharded
from .dataset import Dataset, DatasetMeta
from .domain import (
    DEFAULT_MAX_INDEX,
    CustomerAction,
    CustomerPolicy,
    CustomerSampler,
    EnginePolicy,
    ProfileBatch,
    sample_choices,
)

logger = get_logger(__name__, LogCategory.ROLLOUT)

PriceFn = Callable[[ProfileBatch, np.random.Generator], np.ndarray]


def simulate_sessions(
    customer: CustomerPolicy,
    profiles: ProfileBatch,
    actions: np.ndarray,
    rng: np.random.Generator,
    max_index: int,
    price_fn: Optional[PriceFn] = None,
):
    """
    Play one session per profile with the engine action held throughout. Returns per-record
    arrays (session row, page, customer choice, price) ordered by (session, page).
    """
    n = len(profiles)
    actions = np.asarray(actions, dtype=np.float64)
    pages = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    empty = np.zeros(0, dtype=np.int64)
    steps_session, steps_page, steps_choice, steps_price = [empty], [empty], [empty], [np.zeros(0)]

    while active.size:
        batch = profiles.take(active)
        probs = customer.probabilities(batch, actions[active], pages[active])
        choices = sample_choices(probs, rng)
        price = np.full(active.size, np.nan)
        buy = choices == int(CustomerAction.BUY)
        if price_fn is not None and buy.any():
            price[buy] = price_fn(batch.take(buy), rng)
        steps_session.append(active)
        steps_page.append(pages[active].copy())
        steps_choice.append(choices)
        steps_price.append(price)

        turn = choices == int(CustomerAction.TURN_PAGE)
        pages[active[turn]] += 1
        keep = turn & (pages[active] <= max_index)
        active = active[keep]

    session = np.concatenate(steps_session)
    page = np.concatenate(steps_page)
    order = np.lexsort((page, session))
    return (
        session[order],
        page[order],
        np.concatenate(steps_choice)[order],
        np.concatenate(steps_price)[order],
    )


def _rollout_shard(n, rng, engine, customer, source, max_index, price_fn):
    profiles = source.sample(n, rng)
    actions = np.asarray(engine.act(profiles, rng), dtype=np.float64)
    return (profiles, actions) + simulate_sessions(customer, profiles, actions, rng, max_index, price_fn)


def rollout_sessions(
    engine: EnginePolicy,
    customer: CustomerPolicy,
    source: CustomerSampler,
    count: int,
    seed: int,
    max_index: int = DEFAULT_MAX_INDEX,
    threads: int = 1,
    price_fn: Optional[PriceFn] = None,
    meta: Optional[DatasetMeta] = None,
    shard_size: int = SHARD_SIZE,
) -> Dataset:
    """
    Roll out ``count`` customer sessions.

    The engine acts once per session (the engine state is held across TurnPage). Buy gives
    reward 1 and ends the session, Leave ends it, TurnPage past ``max_index`` ends it.
    """
    if count < 1:
        raise RejectedInputError(f"session count must be at least 1, got {count}")

    def work(n, rng):
        return _rollout_shard(n, rng, engine, customer, source, max_index, price_fn)

    shards = run_sharded(work, count, seed, STREAM_ROLLOUT, threads=threads, shard_size=shard_size)

    offset = 0
    parts = {k: [] for k in ("session", "page", "choice", "price", "actions")}
    profile_parts = []
    for profiles, actions, session, page, choice, price in shards:
        profile_parts.append(profiles.take(session))
        parts["actions"].append(actions[session])
        parts["session"].append(session + offset)
        parts["page"].append(page)
        parts["choice"].append(choice)
        parts["price"].append(price)
        offset += len(profiles)

    choices = np.concatenate(parts["choice"])
    profiles = ProfileBatch.concat(profile_parts)
    if meta is None:
        meta = DatasetMeta(seed=seed, max_index=max_index,
                           engine_dim=parts["actions"][0].shape[1], request_dim=profiles.request_dim)
    else:
        meta = meta.model_copy(update={"max_index": max_index})
    dataset = Dataset.from_arrays(
        meta,
        np.concatenate(parts["session"]),
        profiles,
        np.concatenate(parts["actions"], axis=0),
        np.concatenate(parts["page"]),
        choices,
        (choices == int(CustomerAction.BUY)).astype(np.int64),
        np.concatenate(parts["price"]) if price_fn is not None else None,
    )
    logger.rollout_info(
        f"rolled out {count} sessions, {dataset.n_records} page views",
        operation="rollout_sessions",
    )
    return dataset
