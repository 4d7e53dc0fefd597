"""Single-step transition functions of the engine view and the customer view."""
from typing import NamedTuple, Union

import numpy as np

from .domain import (
    TERMINATED,
    CustomerAction,
    CustomerProfile,
    CustomerSampler,
    CustomerState,
    EnginePolicy,
    PageIndex,
    _Terminated,
    engine_action_for,
)


class EngineTransition(NamedTuple):
    profile: CustomerProfile
    session_boundary: bool


def engine_transition(
    profile: CustomerProfile,
    customer_action: CustomerAction,
    source: CustomerSampler,
    rng: np.random.Generator,
) -> EngineTransition:
    """TurnPage keeps the engine state; Buy and Leave end the session and draw a new customer."""
    if CustomerAction(customer_action) == CustomerAction.TURN_PAGE:
        return EngineTransition(profile, False)
    return EngineTransition(source.sample(1, rng).profile(0), True)


def is_terminal(state: CustomerState, max_index: int) -> bool:
    return state.page.n > max_index


def customer_transition(
    state: CustomerState,
    customer_action: CustomerAction,
    engine: EnginePolicy,
    source: CustomerSampler,
    rng: np.random.Generator,
) -> Union[CustomerState, _Terminated]:
    """
    Buy terminates. TurnPage keeps profile and action and advances the page; callers check
    ``is_terminal`` for page overflow. Leave starts over with a fresh customer at page 0.
    """
    customer_action = CustomerAction(customer_action)
    if customer_action == CustomerAction.BUY:
        return TERMINATED
    if customer_action == CustomerAction.TURN_PAGE:
        return CustomerState(state.profile, state.engine_action, PageIndex(state.page.n + 1))
    fresh = source.sample(1, rng).profile(0)
    return CustomerState(fresh, engine_action_for(engine, fresh, rng), PageIndex(0))
