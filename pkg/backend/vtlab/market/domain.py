"""
Domain types of the two coupled decision processes.

The engine sees a customer profile and answers with a ranking-weight vector; the customer
sees the triple (profile, engine action, page index) and answers Buy, TurnPage or Leave.
Profiles travel in batches (``ProfileBatch``) so rollouts can run many sessions in lockstep;
``CustomerProfile`` is the single-customer view.
"""
from dataclasses import dataclass
from enum import IntEnum
from typing import List, Protocol, Sequence, Tuple, runtime_checkable

import numpy as np

from ..error_handling import RejectedInputError
from ..nn.tensor import Tensor

N_CATEGORIES = 8
N_POWERS = 3
N_LEVELS = 2
TYPE_BLOCKS = (N_CATEGORIES, N_POWERS, N_LEVELS)
N_TYPES = N_CATEGORIES * N_POWERS * N_LEVELS
TYPE_DIM = sum(TYPE_BLOCKS)
DEFAULT_MAX_INDEX = 10
NORM_TOL = 1e-6


class CustomerAction(IntEnum):
    BUY = 0
    TURN_PAGE = 1
    LEAVE = 2

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "CustomerAction":
        try:
            return cls[label.upper()]
        except KeyError as exc:
            raise RejectedInputError(f"unknown customer action '{label}'") from exc


N_CUSTOMER_ACTIONS = len(CustomerAction)


def type_index(category, power, high_level):
    """Row of the 48-cell population table for (category 1..8, power 1..3, level 0/1)."""
    return ((np.asarray(category) - 1) * N_POWERS + (np.asarray(power) - 1)) * N_LEVELS + np.asarray(high_level, dtype=np.int64)


def type_from_index(index):
    index = np.asarray(index, dtype=np.int64)
    level = index % N_LEVELS
    power = (index // N_LEVELS) % N_POWERS + 1
    category = index // (N_LEVELS * N_POWERS) + 1
    return category, power, level.astype(bool)


@dataclass(frozen=True)
class CustomerProfile:
    query_category: int
    purchase_power: int
    high_level: bool
    request_vec: Tuple[float, ...]

    def __post_init__(self):
        if not 1 <= self.query_category <= N_CATEGORIES:
            raise RejectedInputError(f"query_category {self.query_category} outside 1..{N_CATEGORIES}")
        if not 1 <= self.purchase_power <= N_POWERS:
            raise RejectedInputError(f"purchase_power {self.purchase_power} outside 1..{N_POWERS}")
        norm = float(np.linalg.norm(self.request_vec))
        if abs(norm - 1.0) > NORM_TOL:
            raise RejectedInputError(f"request_vec has norm {norm}, expected unit norm")

    @property
    def request_dim(self) -> int:
        return len(self.request_vec)

    @property
    def type_index(self) -> int:
        return int(type_index(self.query_category, self.purchase_power, self.high_level))

    def encode(self) -> Tensor:
        return ProfileBatch.from_profiles([self]).encode()[0]


@dataclass(frozen=True)
class EngineAction:
    weights: Tuple[float, ...]

    def __post_init__(self):
        if not np.isfinite(self.weights).all():
            raise RejectedInputError("engine action contains non-finite weights")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.weights))

    def as_array(self) -> Tensor:
        return np.asarray(self.weights, dtype=np.float64)


@dataclass(frozen=True)
class PageIndex:
    n: int

    def check(self, max_index: int = DEFAULT_MAX_INDEX) -> "PageIndex":
        if not 0 <= self.n <= max_index:
            raise RejectedInputError(f"page index {self.n} outside 0..{max_index}")
        return self


@dataclass(frozen=True)
class CustomerState:
    profile: CustomerProfile
    engine_action: EngineAction
    page: PageIndex


class _Terminated:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "TERMINATED"

    def __bool__(self):
        return False


TERMINATED = _Terminated()


@dataclass
class ProfileBatch:
    """Column-wise batch of profiles: categorical arrays plus an (n, q) request matrix."""
    category: np.ndarray
    power: np.ndarray
    high_level: np.ndarray
    request: np.ndarray

    def __post_init__(self):
        self.category = np.asarray(self.category, dtype=np.int64).reshape(-1)
        self.power = np.asarray(self.power, dtype=np.int64).reshape(-1)
        self.high_level = np.asarray(self.high_level, dtype=bool).reshape(-1)
        self.request = np.asarray(self.request, dtype=np.float64)
        n = self.category.shape[0]
        if self.request.ndim != 2 or self.request.shape[0] != n:
            raise RejectedInputError(f"request matrix has shape {self.request.shape} for {n} profiles")
        if self.power.shape[0] != n or self.high_level.shape[0] != n:
            raise RejectedInputError("profile columns have different lengths")

    def __len__(self) -> int:
        return int(self.category.shape[0])

    @property
    def request_dim(self) -> int:
        return int(self.request.shape[1])

    def validate(self) -> "ProfileBatch":
        if len(self) == 0:
            return self
        if self.category.min() < 1 or self.category.max() > N_CATEGORIES:
            raise RejectedInputError("query_category outside 1..8")
        if self.power.min() < 1 or self.power.max() > N_POWERS:
            raise RejectedInputError("purchase_power outside 1..3")
        norms = np.linalg.norm(self.request, axis=1)
        if np.abs(norms - 1.0).max() > NORM_TOL:
            raise RejectedInputError("request vectors are not unit norm")
        return self

    def type_index(self) -> np.ndarray:
        return type_index(self.category, self.power, self.high_level)

    def encode(self) -> Tensor:
        """One-hot blocks (8 + 3 + 2) followed by the request vector."""
        n = len(self)
        out = np.zeros((n, TYPE_DIM + self.request_dim))
        rows = np.arange(n)
        out[rows, self.category - 1] = 1.0
        out[rows, N_CATEGORIES + self.power - 1] = 1.0
        out[rows, N_CATEGORIES + N_POWERS + self.high_level.astype(np.int64)] = 1.0
        out[:, TYPE_DIM:] = self.request
        return out

    def take(self, index) -> "ProfileBatch":
        return ProfileBatch(self.category[index], self.power[index], self.high_level[index], self.request[index])

    def profile(self, i: int) -> CustomerProfile:
        return CustomerProfile(
            int(self.category[i]), int(self.power[i]), bool(self.high_level[i]),
            tuple(float(v) for v in self.request[i]),
        )

    def to_profiles(self) -> List[CustomerProfile]:
        return [self.profile(i) for i in range(len(self))]

    @classmethod
    def from_profiles(cls, profiles: Sequence[CustomerProfile], request_dim: int = None) -> "ProfileBatch":
        if not profiles:
            return cls.empty(request_dim or 0)
        return cls(
            [p.query_category for p in profiles],
            [p.purchase_power for p in profiles],
            [p.high_level for p in profiles],
            np.array([p.request_vec for p in profiles], dtype=np.float64),
        )

    @classmethod
    def empty(cls, request_dim: int) -> "ProfileBatch":
        return cls(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros((0, request_dim)))

    @classmethod
    def concat(cls, batches: Sequence["ProfileBatch"]) -> "ProfileBatch":
        batches = list(batches)
        return cls(
            np.concatenate([b.category for b in batches]),
            np.concatenate([b.power for b in batches]),
            np.concatenate([b.high_level for b in batches]),
            np.concatenate([b.request for b in batches], axis=0),
        )

    @classmethod
    def repeat(cls, profile: CustomerProfile, n: int) -> "ProfileBatch":
        return cls(
            np.full(n, profile.query_category),
            np.full(n, profile.purchase_power),
            np.full(n, profile.high_level),
            np.tile(np.asarray(profile.request_vec, dtype=np.float64), (n, 1)),
        )


def normalize_rows(matrix: np.ndarray, fallback: np.ndarray = None) -> Tensor:
    """Scale rows to unit norm; zero rows take ``fallback`` (or the first basis vector)."""
    matrix = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    zero = norms[:, 0] == 0.0
    out = matrix / np.where(norms == 0.0, 1.0, norms)
    if zero.any():
        if fallback is None:
            fallback = np.zeros(matrix.shape[1])
            fallback[0] = 1.0
        out[zero] = fallback
    return out


def encode_customer_state(profiles: ProfileBatch, actions: np.ndarray, pages: np.ndarray, max_index: int) -> Tensor:
    """encode(s) | a | n / MaxIndex, one row per customer state."""
    actions = np.asarray(actions, dtype=np.float64)
    pages = np.asarray(pages, dtype=np.float64).reshape(-1, 1)
    scale = float(max(max_index, 1))
    return np.concatenate([profiles.encode(), actions, pages / scale], axis=1)


def customer_state_dim(request_dim: int, engine_dim: int) -> int:
    return TYPE_DIM + request_dim + engine_dim + 1


def onehot_actions(choices: np.ndarray) -> Tensor:
    choices = np.asarray(choices, dtype=np.int64)
    out = np.zeros((choices.shape[0], N_CUSTOMER_ACTIONS))
    out[np.arange(choices.shape[0]), choices] = 1.0
    return out


# interfaces

@runtime_checkable
class CustomerSampler(Protocol):
    """Source of fresh customers (P^c)."""

    def sample(self, n: int, rng: np.random.Generator) -> ProfileBatch:
        ...


@runtime_checkable
class EnginePolicy(Protocol):
    """Maps a batch of profiles to an (n, d) matrix of engine actions."""

    def act(self, profiles: ProfileBatch, rng: np.random.Generator) -> Tensor:
        ...


@runtime_checkable
class CustomerPolicy(Protocol):
    """Maps customer states to (n, 3) probabilities over Buy, TurnPage, Leave."""

    def probabilities(self, profiles: ProfileBatch, actions: np.ndarray, pages: np.ndarray) -> Tensor:
        ...


def customer_probabilities(policy: CustomerPolicy, state: CustomerState) -> Tensor:
    """Single-state view of a batched customer policy."""
    probs = policy.probabilities(
        ProfileBatch.from_profiles([state.profile]),
        state.engine_action.as_array()[None, :],
        np.array([state.page.n]),
    )
    return probs[0]


def engine_action_for(policy: EnginePolicy, profile: CustomerProfile, rng: np.random.Generator) -> EngineAction:
    """Single-profile view of a batched engine policy."""
    return EngineAction(tuple(float(v) for v in policy.act(ProfileBatch.from_profiles([profile]), rng)[0]))


def sample_choices(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per row by inverse CDF on a single uniform per row."""
    u = rng.random(probs.shape[0])
    cdf = np.cumsum(probs, axis=1)
    choices = (u[:, None] >= cdf).sum(axis=1)
    return np.minimum(choices, probs.shape[1] - 1)
