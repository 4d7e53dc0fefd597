"""
Controlled drift of the ground-truth market.

``drift(params, level, seed)`` moves the world along fixed Gaussian directions drawn from
``seed``: the population table is exponentially tilted, preference vectors rotate, the
behavior coefficients shift and the overall buy propensity drops. All moves scale linearly
with ``level``, so level 0 is the identity and larger levels move strictly further.
"""
import math
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from ..config import OracleConfig
from ..error_handling import RejectedInputError
from ..market.domain import N_TYPES
from ..utils.seeding import STREAM_DRIFT, make_rng
from .params import OracleParams


def drift(params: OracleParams, level: float, seed: int, cfg: OracleConfig = None) -> OracleParams:
    if not 0.0 <= level <= 1.0:
        raise RejectedInputError(f"drift level must be in [0, 1], got {level}")
    if level == 0.0:
        return params
    cfg = cfg or OracleConfig()
    rng = make_rng(seed, STREAM_DRIFT)
    population_dir = rng.standard_normal(N_TYPES)
    preference_dir = rng.standard_normal((N_TYPES, params.engine_dim))
    category_dir = rng.standard_normal(len(params.category_coef))
    power_dir = rng.standard_normal(len(params.power_coef))

    base = params.population_array
    with np.errstate(divide="ignore"):
        logits = np.log(base)
    tilted = np.exp(logits + level * cfg.drift_population_scale * population_dir - logits[base > 0].max())
    tilted[base == 0] = 0.0
    population = tilted / tilted.sum()

    preferences = params.preference_matrix + level * cfg.drift_preference_scale * preference_dir
    preferences = preferences / np.linalg.norm(preferences, axis=1, keepdims=True)

    shift = level * cfg.drift_coef_scale
    return OracleParams.model_validate({
        **params.model_dump(),
        "population": tuple(population.tolist()),
        "preferences": tuple(map(tuple, preferences.tolist())),
        "category_coef": tuple((np.asarray(params.category_coef) + shift * category_dir).tolist()),
        "power_coef": tuple((np.asarray(params.power_coef) + shift * power_dir).tolist()),
        "buy_bias": params.buy_bias + level * cfg.drift_buy_shift,
    })


class DriftSchedule(BaseModel):
    """Ordered (slice id, drift level) pairs."""
    model_config = ConfigDict(frozen=True)

    name: str
    slices: Tuple[Tuple[str, float], ...]

    @model_validator(mode="after")
    def check_levels(self):
        for _, level in self.slices:
            if not 0.0 <= level <= 1.0:
                raise ValueError(f"drift level {level} outside [0, 1]")
        return self

    @property
    def levels(self) -> List[float]:
        return [level for _, level in self.slices]

    @property
    def slice_ids(self) -> List[str]:
        return [slice_id for slice_id, _ in self.slices]

    @classmethod
    def day_slots(cls, slots: int = 12) -> "DriftSchedule":
        """One day in equal slots; drift rises to 1 at midday and returns."""
        return cls(
            name=f"{slots}-slot day",
            slices=tuple(
                (f"slot-{k:02d}", 0.5 * (1.0 - math.cos(2.0 * math.pi * k / slots)))
                for k in range(slots)
            ),
        )

    @classmethod
    def day_week_month(cls, levels=(0.2, 0.5, 1.0)) -> "DriftSchedule":
        levels = tuple(levels)
        if list(levels) != sorted(levels):
            raise RejectedInputError("day/week/month drift levels must be nondecreasing")
        return cls(name="day/week/month", slices=tuple(zip(("day", "week", "month"), levels)))

    @classmethod
    def stationary(cls, slots: int = 12) -> "DriftSchedule":
        return cls(name="stationary", slices=tuple((f"slot-{k:02d}", 0.0) for k in range(slots)))

    @classmethod
    def preset(cls, name: str) -> "DriftSchedule":
        presets = {
            "12-slot day": cls.day_slots,
            "day/week/month": cls.day_week_month,
            "stationary": cls.stationary,
        }
        if name not in presets:
            raise RejectedInputError(f"unknown drift schedule '{name}'", suggestions=sorted(presets))
        return presets[name]()
