"""
Logged interaction records.

A ``Dataset`` keeps one row per page view in a pandas table, ordered by (session, page),
plus run metadata. ``Session`` and ``StepRecord`` are per-customer views built on demand.

File format::

    VTLAB-DATA v1
    {"meta": {...}}
    {"profile": {...}, "steps": [{"action": [...], "page": 0, "customer_action": "turn_page", "reward": 0, "price": null}, ...]}
    ...
"""
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from ..core.logging_config import LogCategory, get_logger
from ..error_handling import MissingInputError, RejectedInputError
from .domain import (
    N_CATEGORIES,
    CustomerAction,
    CustomerProfile,
    CustomerState,
    EngineAction,
    PageIndex,
    ProfileBatch,
)

logger = get_logger(__name__, LogCategory.DATA)

HEADER = "VTLAB-DATA v1"
PROFILE_COLUMNS = ["query_category", "purchase_power", "high_level"]


class DatasetMeta(BaseModel):
    model_config = ConfigDict(extra="forbid")

    logging_policy: str = "unknown"
    time_slice: Optional[str] = None
    seed: Optional[int] = None
    drift_level: float = 0.0
    max_index: int = 10
    engine_dim: int = 8
    request_dim: int = 4


@dataclass(frozen=True)
class StepRecord:
    state: CustomerState
    customer_action: CustomerAction
    reward: int
    price: Optional[float]


@dataclass
class Session:
    profile: CustomerProfile
    actions: np.ndarray
    pages: np.ndarray
    customer_actions: np.ndarray
    rewards: np.ndarray
    prices: np.ndarray

    def __len__(self) -> int:
        return int(self.pages.shape[0])

    @property
    def records(self) -> List[StepRecord]:
        out = []
        for i in range(len(self)):
            price = float(self.prices[i])
            out.append(StepRecord(
                CustomerState(self.profile, EngineAction(tuple(self.actions[i].tolist())), PageIndex(int(self.pages[i]))),
                CustomerAction(int(self.customer_actions[i])),
                int(self.rewards[i]),
                None if math.isnan(price) else price,
            ))
        return out


def request_columns(q: int) -> List[str]:
    return [f"req_{i}" for i in range(q)]


def action_columns(d: int) -> List[str]:
    return [f"act_{i}" for i in range(d)]


class Dataset:
    """Sessions of logged page views plus metadata."""

    def __init__(self, records: pd.DataFrame, meta: DatasetMeta):
        self.records = records.reset_index(drop=True)
        self.meta = meta

    # construction

    @classmethod
    def from_arrays(
        cls,
        meta: DatasetMeta,
        session: np.ndarray,
        profiles: ProfileBatch,
        actions: np.ndarray,
        pages: np.ndarray,
        customer_actions: np.ndarray,
        rewards: np.ndarray,
        prices: Optional[np.ndarray] = None,
    ) -> "Dataset":
        n = len(profiles)
        data = {
            "session": np.asarray(session, dtype=np.int64),
            "page": np.asarray(pages, dtype=np.int64),
            "query_category": profiles.category,
            "purchase_power": profiles.power,
            "high_level": profiles.high_level,
        }
        for i, col in enumerate(request_columns(meta.request_dim)):
            data[col] = profiles.request[:, i]
        actions = np.asarray(actions, dtype=np.float64).reshape(n, meta.engine_dim)
        for i, col in enumerate(action_columns(meta.engine_dim)):
            data[col] = actions[:, i]
        data["customer_action"] = np.asarray(customer_actions, dtype=np.int64)
        data["reward"] = np.asarray(rewards, dtype=np.int64)
        data["price"] = np.full(n, np.nan) if prices is None else np.asarray(prices, dtype=np.float64)
        return cls(pd.DataFrame(data), meta)

    # views

    def __len__(self) -> int:
        return self.n_sessions

    def __iter__(self) -> Iterator[Session]:
        return iter(self.sessions())

    @property
    def n_sessions(self) -> int:
        return int(self.records["session"].nunique()) if len(self.records) else 0

    @property
    def n_records(self) -> int:
        return int(len(self.records))

    def profiles(self) -> ProfileBatch:
        """One profile per record."""
        return self._profiles_of(self.records)

    def _profiles_of(self, frame: pd.DataFrame) -> ProfileBatch:
        return ProfileBatch(
            frame["query_category"].to_numpy(),
            frame["purchase_power"].to_numpy(),
            frame["high_level"].to_numpy(),
            frame[request_columns(self.meta.request_dim)].to_numpy(dtype=np.float64).reshape(len(frame), self.meta.request_dim),
        )

    def session_profiles(self) -> ProfileBatch:
        """One profile per session (the customers that arrived)."""
        return self._profiles_of(self.records.drop_duplicates("session", keep="first"))

    def actions(self) -> np.ndarray:
        return self.records[action_columns(self.meta.engine_dim)].to_numpy(dtype=np.float64).reshape(self.n_records, self.meta.engine_dim)

    def pages(self) -> np.ndarray:
        return self.records["page"].to_numpy()

    def customer_actions(self) -> np.ndarray:
        return self.records["customer_action"].to_numpy()

    def rewards(self) -> np.ndarray:
        return self.records["reward"].to_numpy()

    def prices(self) -> np.ndarray:
        return self.records["price"].to_numpy(dtype=np.float64)

    def purchase_mask(self) -> np.ndarray:
        return self.rewards() == 1

    def with_records(self, records: pd.DataFrame) -> "Dataset":
        return Dataset(records, self.meta)

    def sessions(self) -> List[Session]:
        frame = self.records
        if frame.empty:
            return []
        profiles = self.profiles()
        actions = self.actions()
        bounds = np.flatnonzero(np.diff(frame["session"].to_numpy())) + 1
        starts = np.concatenate([[0], bounds])
        ends = np.concatenate([bounds, [len(frame)]])
        out = []
        pages, choices, rewards, prices = self.pages(), self.customer_actions(), self.rewards(), self.prices()
        for start, end in zip(starts, ends):
            out.append(Session(
                profiles.profile(int(start)),
                actions[start:end],
                pages[start:end],
                choices[start:end],
                rewards[start:end],
                prices[start:end],
            ))
        return out

    def validate(self) -> "Dataset":
        """Check the session invariants; raises RejectedInputError on the first violation."""
        frame = self.records
        if frame.empty:
            return self
        self.profiles().validate()
        grouped = frame.groupby("session", sort=False)
        first_pages = grouped["page"].first()
        if (first_pages != 0).any():
            raise RejectedInputError("a session does not start at page 0")
        steps = grouped["page"].diff().dropna()
        if (steps != 1).any():
            raise RejectedInputError("page indices must increase by exactly 1 within a session")
        if (frame["page"] > self.meta.max_index).any():
            raise RejectedInputError(f"page index above MaxIndex {self.meta.max_index}")
        constant = grouped[PROFILE_COLUMNS + request_columns(self.meta.request_dim)].nunique()
        if (constant > 1).any().any():
            raise RejectedInputError("customer profile changes within a session")
        last = grouped.cumcount(ascending=False) == 0
        if (frame["reward"][~last] != 0).any():
            raise RejectedInputError("only the final record of a session may carry reward 1")
        if ((frame["reward"] == 1) != (frame["customer_action"] == int(CustomerAction.BUY))).any():
            raise RejectedInputError("reward must be 1 exactly on purchases")
        if (frame["customer_action"][~last] != int(CustomerAction.TURN_PAGE)).any():
            raise RejectedInputError("only TurnPage may continue a session")
        return self


# persistence

def _session_json(session: Session) -> str:
    steps = []
    for i in range(len(session)):
        price = float(session.prices[i])
        steps.append({
            "action": [float(v) for v in session.actions[i]],
            "page": int(session.pages[i]),
            "customer_action": CustomerAction(int(session.customer_actions[i])).label,
            "reward": int(session.rewards[i]),
            "price": None if math.isnan(price) else price,
        })
    profile = session.profile
    return json.dumps({
        "profile": {
            "query_category": profile.query_category,
            "purchase_power": profile.purchase_power,
            "high_level": profile.high_level,
            "request_vec": list(profile.request_vec),
        },
        "steps": steps,
    })


def save_dataset(dataset: Dataset, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        handle.write(HEADER + "\n")
        handle.write(json.dumps({"meta": dataset.meta.model_dump(mode="json")}, sort_keys=True) + "\n")
        for session in dataset.sessions():
            handle.write(_session_json(session) + "\n")
    logger.persistence_info(
        f"wrote {dataset.n_sessions} sessions ({dataset.n_records} records) to {path}",
        operation="save_dataset",
    )
    return path


def load_dataset(path: Union[str, Path], producer: str = "gen-data") -> Dataset:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(str(path), producer)
    with path.open("r", encoding="utf-8") as handle:
        header = handle.readline().rstrip("\n")
        if header != HEADER:
            raise RejectedInputError(f"{path} is not a {HEADER} file")
        meta = DatasetMeta.model_validate(json.loads(handle.readline())["meta"])
        rows = {"session": [], "page": [], "customer_action": [], "reward": [], "price": []}
        categories, powers, levels, requests, actions = [], [], [], [], []
        for session_id, line in enumerate(handle):
            if not line.strip():
                continue
            entry = json.loads(line)
            profile = entry["profile"]
            for step in entry["steps"]:
                rows["session"].append(session_id)
                rows["page"].append(step["page"])
                rows["customer_action"].append(int(CustomerAction.from_label(step["customer_action"])))
                rows["reward"].append(step["reward"])
                rows["price"].append(np.nan if step["price"] is None else step["price"])
                categories.append(profile["query_category"])
                powers.append(profile["purchase_power"])
                levels.append(profile["high_level"])
                requests.append(profile["request_vec"])
                actions.append(step["action"])
    profiles = ProfileBatch(
        categories, powers, levels,
        np.asarray(requests, dtype=np.float64).reshape(len(categories), meta.request_dim),
    )
    return Dataset.from_arrays(
        meta,
        np.asarray(rows["session"]),
        profiles,
        np.asarray(actions, dtype=np.float64).reshape(len(categories), meta.engine_dim),
        np.asarray(rows["page"]),
        np.asarray(rows["customer_action"]),
        np.asarray(rows["reward"]),
        np.asarray(rows["price"], dtype=np.float64),
    )


FEATURE_VALUES = (
    [("query_category", v) for v in range(1, N_CATEGORIES + 1)]
    + [("purchase_power", v) for v in (1, 2, 3)]
    + [("high_level", v) for v in (False, True)]
)
