"""Business metrics over logged page views: R2P, TT, TV and action-norm statistics."""
from pathlib import Path
from typing import Iterable, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from ..error_handling import RejectedInputError
from .dataset import FEATURE_VALUES, Dataset, Session


class SessionMetrics(BaseModel):
    r2p: float
    tt: float
    tv: int
    mean_session_length: float
    n_sessions: int
    n_records: int
    action_norm_mean: float
    action_norm_std: float
    action_norm_max: float

    def to_frame(self) -> pd.DataFrame:
        values = self.model_dump()
        return pd.DataFrame({"metric": list(values), "value": list(values.values())})


def _record_view(sessions: Union[Dataset, Iterable[Session]]):
    if isinstance(sessions, Dataset):
        return sessions
    sessions = list(sessions)
    if not sessions:
        raise RejectedInputError("metrics need at least one session")
    rows = []
    for sid, session in enumerate(sessions):
        for i in range(len(session)):
            rows.append({
                "session": sid,
                "page": int(session.pages[i]),
                "reward": int(session.rewards[i]),
                "price": float(session.prices[i]),
                "action_norm": float(np.linalg.norm(session.actions[i])),
            })
    frame = pd.DataFrame(rows)
    return _FrameView(frame)


class _FrameView:
    """Minimal record view for sessions that did not come from a Dataset."""

    def __init__(self, frame: pd.DataFrame):
        self.records = frame
        self.n_records = len(frame)
        self.n_sessions = int(frame["session"].nunique())

    def rewards(self):
        return self.records["reward"].to_numpy()

    def prices(self):
        return self.records["price"].to_numpy(dtype=np.float64)

    def action_norms(self):
        return self.records["action_norm"].to_numpy()


def compute_metrics(sessions: Union[Dataset, Iterable[Session]]) -> SessionMetrics:
    """
    R2P = purchases / page views, TV = number of purchases, TT = summed purchase prices
    (0 when prices are absent).
    """
    data = _record_view(sessions)
    if data.n_records == 0:
        raise RejectedInputError("metrics need at least one page view")
    rewards = data.rewards()
    purchases = rewards == 1
    prices = data.prices()[purchases]
    tt = float(np.nansum(prices)) if prices.size else 0.0
    if isinstance(data, Dataset):
        norms = np.linalg.norm(data.actions(), axis=1)
    else:
        norms = data.action_norms()
    return SessionMetrics(
        r2p=float(purchases.sum()) / data.n_records,
        tt=tt,
        tv=int(purchases.sum()),
        mean_session_length=data.n_records / data.n_sessions,
        n_sessions=data.n_sessions,
        n_records=data.n_records,
        action_norm_mean=float(norms.mean()),
        action_norm_std=float(norms.std()),
        action_norm_max=float(norms.max()),
    )


def r2p_by_feature(dataset: Dataset) -> pd.DataFrame:
    """One row per feature value (8 categories, 3 powers, 2 levels) with PVs, purchases and R2P."""
    if dataset.n_records == 0:
        raise RejectedInputError("per-feature R2P needs at least one page view")
    frame = dataset.records
    rows = []
    for feature, value in FEATURE_VALUES:
        mask = frame[feature] == value
        pv = int(mask.sum())
        purchases = int(frame.loc[mask, "reward"].sum())
        rows.append({
            "feature": feature,
            "value": int(value),
            "pv": pv,
            "purchases": purchases,
            "r2p": purchases / pv if pv else float("nan"),
        })
    return pd.DataFrame(rows)


def write_metrics_csv(metrics: SessionMetrics, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    metrics.to_frame().to_csv(path, index=False, lineterminator="\n")
    return path
