"""Ground-truth customers, behavior, prices and logged-data generation."""
from typing import Optional

import numpy as np
import pandas as pd
from scipy import special

from ..core.logging_config import LogCategory, get_logger
from ..error_handling import RejectedInputError
from ..market.dataset import Dataset, DatasetMeta
from ..market.domain import CustomerPolicy, CustomerProfile, EnginePolicy, ProfileBatch, normalize_rows, type_from_index
from ..market.metrics import compute_metrics
from ..market.policies import UniformLoggingPolicy
from ..market.rollout import rollout_sessions
from ..nn.tensor import Tensor
from .params import OracleParams

logger = get_logger(__name__, LogCategory.DATA)


class OracleSampler:
    """Draws customers from the hidden population table."""

    def __init__(self, params: OracleParams):
        self.params = params
        self._population = params.population_array
        self._centers = params.center_matrix

    def sample(self, n: int, rng: np.random.Generator) -> ProfileBatch:
        cells = rng.choice(self._population.size, size=n, p=self._population)
        category, power, level = type_from_index(cells)
        noise = rng.standard_normal((n, self.params.request_dim))
        centers = self._centers[category - 1]
        request = normalize_rows(centers + self.params.request_noise * noise)
        return ProfileBatch(category, power, level, request)


def oracle_sample_customer(params: OracleParams, rng: np.random.Generator) -> CustomerProfile:
    return OracleSampler(params).sample(1, rng).profile(0)


class OracleCustomerPolicy:
    """Ground-truth customer behavior: softmax over (buy, turn, leave) logits."""

    def __init__(self, params: OracleParams):
        self.params = params
        self._preferences = params.preference_matrix
        self._type_bias = params.buy_bias + params.type_bias()
        self._fatigue = np.asarray(params.fatigue, dtype=np.float64)

    @property
    def engine_dim(self) -> int:
        return self.params.engine_dim

    def _fatigue_at(self, pages: np.ndarray) -> np.ndarray:
        pages = np.clip(np.asarray(pages, dtype=np.int64), 0, self._fatigue.size - 1)
        return self._fatigue[pages]

    def logits(self, profiles: ProfileBatch, actions: np.ndarray, pages: np.ndarray) -> Tensor:
        actions = np.asarray(actions, dtype=np.float64)
        cells = profiles.type_index()
        preference = np.einsum("ij,ij->i", self._preferences[cells], actions)
        norm_sq = np.einsum("ij,ij->i", actions, actions)
        fatigue = self._fatigue_at(pages)
        p = self.params
        buy = self._type_bias[cells] + p.action_coef * (preference - p.norm_coef * norm_sq) - fatigue
        turn = p.turn_bias - fatigue
        return np.stack([buy, turn, np.zeros_like(buy)], axis=1)

    def probabilities(self, profiles: ProfileBatch, actions: np.ndarray, pages: np.ndarray) -> Tensor:
        return special.softmax(self.logits(profiles, actions, pages), axis=1)

    def optimal_actions(self) -> Tensor:
        """Per population cell, the action maximizing the buy logit."""
        scale = 1.0 / (2.0 * self.params.norm_coef) if self.params.norm_coef > 0 else 1.0
        return self._preferences * scale


def oracle_customer_policy(params: OracleParams) -> OracleCustomerPolicy:
    return OracleCustomerPolicy(params)


class PriceModel:
    """base(purchase power) x LogNormal(0, sigma)."""

    def __init__(self, params: OracleParams):
        self.base = np.asarray(params.base_prices, dtype=np.float64)
        self.sigma = params.price_sigma

    def __call__(self, profiles: ProfileBatch, rng: np.random.Generator) -> np.ndarray:
        return self.base[profiles.power - 1] * rng.lognormal(0.0, self.sigma, size=len(profiles))


def logging_policy(params: OracleParams, low: float = -0.5, high: float = 0.5) -> UniformLoggingPolicy:
    return UniformLoggingPolicy(params.engine_dim, low, high)


def generate_log(
    params: OracleParams,
    policy: EnginePolicy,
    sessions: int,
    seed: int,
    threads: int = 1,
    time_slice: Optional[str] = None,
    drift_level: float = 0.0,
    customer_override: Optional[CustomerPolicy] = None,
) -> Dataset:
    """
    Deploy ``policy`` in the ground-truth market and log ``sessions`` sessions with prices.
    ``customer_override`` replaces the oracle's behavior model (debugging and tests).
    """
    if sessions < 1:
        raise RejectedInputError(f"session count must be at least 1, got {sessions}")
    meta = DatasetMeta(
        logging_policy=getattr(policy, "policy_id", type(policy).__name__),
        time_slice=time_slice,
        seed=seed,
        drift_level=drift_level,
        max_index=params.max_index,
        engine_dim=params.engine_dim,
        request_dim=params.request_dim,
    )
    dataset = rollout_sessions(
        policy,
        customer_override or OracleCustomerPolicy(params),
        OracleSampler(params),
        sessions,
        seed,
        max_index=params.max_index,
        threads=threads,
        price_fn=PriceModel(params),
        meta=meta,
    )
    logger.data_info(
        f"generated {dataset.n_sessions} sessions / {dataset.n_records} page views "
        f"(drift {drift_level}, slice {time_slice})",
        operation="generate_log",
    )
    return dataset


def evaluate_in_oracle(params: OracleParams, policy: EnginePolicy, sessions: int, seed: int, threads: int = 1):
    """Ground-truth metrics of deploying ``policy``."""
    return compute_metrics(generate_log(params, policy, sessions, seed, threads=threads))


def action_norm_report(dataset: Dataset, mu: float = 0.01) -> pd.DataFrame:
    """Quantiles of logged engine-action norms and the share at or below ``mu``."""
    if dataset.n_records == 0:
        raise RejectedInputError("action-norm report needs logged records")
    norms = np.linalg.norm(dataset.actions(), axis=1)
    quantiles = (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)
    rows = [{"metric": f"norm_q{int(q * 100):02d}", "value": float(np.quantile(norms, q))} for q in quantiles]
    rows.append({"metric": "norm_mean", "value": float(norms.mean())})
    rows.append({"metric": "share_at_or_below_mu", "value": float((norms <= mu).mean())})
    rows.append({"metric": "mu", "value": float(mu)})
    return pd.DataFrame(rows)
