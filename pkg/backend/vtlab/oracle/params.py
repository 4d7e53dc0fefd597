"""
Ground-truth marketplace parameters.

The hidden customer population is a 48-cell table over (query category, purchase power,
level). Each cell carries a unit preference vector w over engine-action space. A customer at
page n facing engine action a chooses by softmax over three logits::

    buy   = buy_bias + c_cat[cat] + c_pow[pow] + c_lvl * level + kappa * (<w, a> - zeta * |a|^2) - f[n]
    turn  = turn_bias - f[n]
    leave = 0

so the best action for a type is w / (2 zeta), and deeper pages make both buying and paging
less likely than leaving.
"""
import json
from pathlib import Path
from typing import List, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from ..config import OracleConfig
from ..error_handling import MissingInputError
from ..market.domain import N_CATEGORIES, N_POWERS, N_TYPES, type_from_index
from ..utils.seeding import make_rng

STREAM_WORLD = 51

CATEGORY_WEIGHTS = (0.22, 0.18, 0.15, 0.12, 0.11, 0.09, 0.08, 0.05)
POWER_WEIGHTS = (0.5, 0.35, 0.15)
HIGH_LEVEL_SHARE = 0.3


class OracleParams(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    engine_dim: int
    request_dim: int
    max_index: int
    population: Tuple[float, ...]
    preferences: Tuple[Tuple[float, ...], ...]
    category_centers: Tuple[Tuple[float, ...], ...]
    request_noise: float
    buy_bias: float
    category_coef: Tuple[float, ...]
    power_coef: Tuple[float, ...]
    level_coef: float
    action_coef: float
    norm_coef: float
    turn_bias: float
    fatigue: Tuple[float, ...]
    base_prices: Tuple[float, float, float]
    price_sigma: float

    @model_validator(mode="after")
    def check_invariants(self):
        population = np.asarray(self.population)
        if population.shape != (N_TYPES,):
            raise ValueError(f"population table needs {N_TYPES} cells")
        if (population < 0).any() or abs(population.sum() - 1.0) > 1e-9:
            raise ValueError("population weights must be nonnegative and sum to 1")
        if np.asarray(self.preferences).shape != (N_TYPES, self.engine_dim):
            raise ValueError("preferences must be 48 x engine_dim")
        if np.asarray(self.category_centers).shape != (N_CATEGORIES, self.request_dim):
            raise ValueError("category centers must be 8 x request_dim")
        if len(self.category_coef) != N_CATEGORIES or len(self.power_coef) != N_POWERS:
            raise ValueError("behavior coefficients have the wrong length")
        if len(self.fatigue) != self.max_index + 1:
            raise ValueError("fatigue needs one entry per page index 0..max_index")
        if any(p <= 0 for p in self.base_prices):
            raise ValueError("base prices must be positive")
        scalars = [self.request_noise, self.buy_bias, self.level_coef, self.action_coef,
                   self.norm_coef, self.turn_bias, self.price_sigma]
        arrays = [self.preferences, self.category_centers, self.category_coef, self.power_coef, self.fatigue]
        if not all(np.isfinite(scalars)) or not all(np.isfinite(np.asarray(a)).all() for a in arrays):
            raise ValueError("parameters must be finite")
        return self

    # array views

    @property
    def population_array(self) -> np.ndarray:
        return np.asarray(self.population, dtype=np.float64)

    @property
    def preference_matrix(self) -> np.ndarray:
        return np.asarray(self.preferences, dtype=np.float64)

    @property
    def center_matrix(self) -> np.ndarray:
        return np.asarray(self.category_centers, dtype=np.float64)

    def type_bias(self) -> np.ndarray:
        """Action-independent part of the buy logit per population cell (without buy_bias)."""
        category, power, level = type_from_index(np.arange(N_TYPES))
        return (
            np.asarray(self.category_coef)[category - 1]
            + np.asarray(self.power_coef)[power - 1]
            + self.level_coef * level
        )

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True)


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    return matrix / np.linalg.norm(matrix, axis=1, keepdims=True)


def default_population() -> np.ndarray:
    category = np.asarray(CATEGORY_WEIGHTS)
    power = np.asarray(POWER_WEIGHTS)
    level = np.array([1.0 - HIGH_LEVEL_SHARE, HIGH_LEVEL_SHARE])
    table = category[:, None, None] * power[None, :, None] * level[None, None, :]
    return (table / table.sum()).reshape(-1)


def default_params(cfg: OracleConfig = None) -> OracleParams:
    """Calibrated world drawn from ``cfg.world_seed``."""
    cfg = cfg or OracleConfig()
    rng = make_rng(cfg.world_seed, STREAM_WORLD)
    preferences = _unit_rows(rng.standard_normal((N_TYPES, cfg.engine_dim)))
    centers = _unit_rows(rng.standard_normal((N_CATEGORIES, cfg.request_dim)))
    population = default_population()
    category_coef = np.linspace(-cfg.category_spread, cfg.category_spread, N_CATEGORIES)
    power_coef = np.array([-cfg.power_spread, 0.0, cfg.power_spread])
    level_coef = cfg.level_coef
    category, power, level = type_from_index(np.arange(N_TYPES))
    type_bias = category_coef[category - 1] + power_coef[power - 1] + level_coef * level
    buy_bias = cfg.target_buy_logit - float(population @ type_bias)
    return OracleParams(
        engine_dim=cfg.engine_dim,
        request_dim=cfg.request_dim,
        max_index=cfg.max_index,
        population=tuple(population.tolist()),
        preferences=tuple(map(tuple, preferences.tolist())),
        category_centers=tuple(map(tuple, centers.tolist())),
        request_noise=cfg.request_noise,
        buy_bias=buy_bias,
        category_coef=tuple(category_coef.tolist()),
        power_coef=tuple(power_coef.tolist()),
        level_coef=level_coef,
        action_coef=cfg.action_coef,
        norm_coef=cfg.norm_coef,
        turn_bias=cfg.turn_bias,
        fatigue=tuple(cfg.fatigue * (n + 1) for n in range(cfg.max_index + 1)),
        base_prices=tuple(cfg.base_prices),
        price_sigma=cfg.price_sigma,
    )


def save_params(params: OracleParams, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(params.to_json() + "\n", encoding="utf-8")
    return path


def load_params(path: Union[str, Path], producer: str = "gen-data") -> OracleParams:
    path = Path(path)
    if not path.exists():
        raise MissingInputError(str(path), producer)
    return OracleParams.model_validate_json(path.read_text(encoding="utf-8"))


def population_with(params: OracleParams, population: List[float]) -> OracleParams:
    """Copy of ``params`` with a different population table (validated)."""
    return OracleParams.model_validate({**params.model_dump(), "population": tuple(population)})


__all__ = [
    "OracleParams",
    "default_params",
    "default_population",
    "load_params",
    "population_with",
    "save_params",
]
