"""
Configuration for vtlab runs

Run hyperparameters live in namespaced pydantic models (``oracle.*``, ``gansd.*``, ...)
aggregated in ``RunConfig``. Process-level settings (output root, logging) come from
environment variables with the ``VTLAB_`` prefix or a ``.env`` file.
"""
import hashlib
import json
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .error_handling import ConfigValidationError, RejectedInputError


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True, frozen=False)


class OracleConfig(Section):
    """Synthetic marketplace structure and calibration"""
    world_seed: int = 2018
    engine_dim: int = Field(8, ge=1)
    request_dim: int = Field(4, ge=1)
    max_index: int = Field(10, ge=0)
    fatigue: float = Field(0.1, ge=0.0)
    action_coef: float = 1.5
    norm_coef: float = Field(1.0, ge=0.0)
    turn_bias: float = 0.0
    level_coef: float = 0.2
    category_spread: float = 0.35
    power_spread: float = 0.15
    target_buy_logit: float = -0.45
    request_noise: float = Field(0.3, ge=0.0)
    base_prices: Tuple[float, float, float] = (10.0, 30.0, 100.0)
    price_sigma: float = Field(0.25, ge=0.0)
    logging_low: float = -0.5
    logging_high: float = 0.5
    drift_population_scale: float = Field(1.0, ge=0.0)
    drift_preference_scale: float = Field(0.5, ge=0.0)
    drift_coef_scale: float = Field(0.3, ge=0.0)
    drift_buy_shift: float = -0.3

    @field_validator("base_prices")
    @classmethod
    def prices_positive(cls, v):
        if any(p <= 0 for p in v):
            raise ValueError("base prices must be positive")
        return v

    @model_validator(mode="after")
    def logging_range(self):
        if self.logging_high <= self.logging_low:
            raise ValueError("logging_high must exceed logging_low")
        return self


class GansdConfig(Section):
    """Customer generator training"""
    noise_dim: int = Field(10, ge=1)
    hidden: Tuple[int, ...] = (64, 64)
    alpha: float = Field(1.0, ge=0.0)
    beta: float = Field(1.0, ge=0.0)
    batch_size: int = Field(256, ge=1)
    gen_steps: int = Field(3, ge=1)
    iterations: int = Field(2000, ge=0)
    lr: float = Field(1e-3, gt=0.0)


class MailConfig(Section):
    """Adversarial imitation of the customer policy"""
    iterations: int = Field(300, ge=0)
    trajectories: int = Field(64, ge=1)
    step_cap: int = Field(200, ge=1)
    hidden: Tuple[int, ...] = (64, 64)
    disc_hidden: Tuple[int, ...] = (64, 64)
    disc_lr: float = Field(1e-3, gt=0.0)
    disc_steps: int = Field(1, ge=1)
    init_log_std: float = math.log(0.3)
    holdout_fraction: float = Field(0.1, gt=0.0, lt=1.0)
    expert_batch: int = Field(4096, ge=1)


class TrpoConfig(Section):
    """Trust-region policy optimization"""
    max_kl: float = Field(0.01, gt=0.0)
    cg_iters: int = Field(10, ge=1)
    cg_damping: float = Field(0.1, ge=0.0)
    backtrack_factor: float = Field(0.5, gt=0.0, lt=1.0)
    max_backtracks: int = Field(10, ge=1)
    gamma: float = Field(0.99, gt=0.0, le=1.0)
    lam: float = Field(0.95, gt=0.0, le=1.0)
    batch_size: int = Field(8192, ge=1)
    iterations: int = Field(100, ge=0)
    hidden: Tuple[int, ...] = (64, 64)
    init_log_std: float = math.log(0.3)
    value_epochs: int = Field(5, ge=0)
    value_lr: float = Field(1e-3, gt=0.0)
    value_batch: int = Field(256, ge=1)


class AncConfig(Section):
    """Action-norm constraint on engine rewards"""
    enabled: bool = True
    rho: float = Field(1.0, ge=0.0)
    mu: float = Field(0.01, ge=0.0)


class SlConfig(Section):
    """Supervised engine policies"""
    lambda1: float = Field(0.3, ge=0.0)
    lambda2: float = Field(0.001, ge=0.0)
    epochs: int = Field(100, ge=0)
    batch_size: int = Field(256, ge=1)
    lr: float = Field(1e-3, gt=0.0)
    hidden: Tuple[int, ...] = (64, 64)
    clip_norm: float = Field(10.0, gt=0.0)


class BcConfig(Section):
    """Behavior-cloning customer model"""
    epochs: int = Field(30, ge=0)
    batch_size: int = Field(256, ge=1)
    lr: float = Field(1e-3, gt=0.0)
    hidden: Tuple[int, ...] = (64, 64)


class BenchConfig(Section):
    """Experiment harness budgets"""
    seeds: int = Field(5, ge=1)
    distribution_samples: int = Field(1_000_000, ge=1)
    eval_sessions: int = Field(50_000, ge=1)
    slot_sessions: int = Field(20_000, ge=1)
    slot_gansd_iterations: int = Field(300, ge=0)
    slot_mail_iterations: int = Field(40, ge=0)
    drift_levels: Tuple[float, ...] = (0.2, 0.5, 1.0)
    low_confidence_pv: int = Field(100, ge=0)
    bc_sampler: str = "gansd"
    distribution_tv_max: float = 0.05
    r2p_gap_max: float = 0.15
    feature_correlation_min: float = 0.8
    time_correlation_min: float = 0.7

    @field_validator("bc_sampler")
    @classmethod
    def known_sampler(cls, v):
        if v not in ("gansd", "empirical"):
            raise ValueError("bc_sampler must be 'gansd' or 'empirical'")
        return v


class RunConfig(Section):
    """Effective configuration of one run"""
    seed: int = 0
    threads: int = Field(1, ge=1)
    sessions: int = Field(200_000, ge=1)
    drift_level: float = Field(0.0, ge=0.0, le=1.0)
    oracle: OracleConfig = Field(default_factory=OracleConfig)
    gansd: GansdConfig = Field(default_factory=GansdConfig)
    mail: MailConfig = Field(default_factory=MailConfig)
    trpo: TrpoConfig = Field(default_factory=TrpoConfig)
    anc: AncConfig = Field(default_factory=AncConfig)
    sl: SlConfig = Field(default_factory=SlConfig)
    bc: BcConfig = Field(default_factory=BcConfig)
    bench: BenchConfig = Field(default_factory=BenchConfig)

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True)

    def config_hash(self) -> str:
        return hashlib.md5(self.canonical_json().encode("utf-8")).hexdigest()


class EnvironmentSettings(BaseSettings):
    """Process-level settings with environment variable support"""
    out: str = "runs"
    log_level: str = "INFO"
    structured_logs: bool = False
    log_file: Optional[str] = None

    model_config = SettingsConfigDict(
        env_prefix="VTLAB_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )


# loading and snapshots

def _flatten(tree: Dict[str, Any], prefix: str = "") -> Dict[str, Any]:
    flat = {}
    for key, value in tree.items():
        dotted = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, dotted + "."))
        else:
            flat[dotted] = value
    return flat


def _nest(flat: Dict[str, Any]) -> Dict[str, Any]:
    tree: Dict[str, Any] = {}
    for dotted, value in flat.items():
        node = tree
        parts = dotted.split(".")
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigValidationError({dotted: f"'{part}' is not a section"})
            node = child
        node[parts[-1]] = value
    return tree


def parse_value(text: str) -> Any:
    """Parse an override value with TOML scalar rules; bare words stay strings."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def parse_overrides(assignments: Iterable[str]) -> Dict[str, Any]:
    flat = {}
    bad = {}
    for item in assignments:
        if "=" not in item:
            bad[item] = "expected key=value"
            continue
        key, value = item.split("=", 1)
        flat[key.strip()] = parse_value(value.strip())
    if bad:
        raise ConfigValidationError(bad)
    return flat


def read_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Dotted key-value text (TOML subset) to a flat dict."""
    path = Path(path)
    try:
        tree = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigValidationError({str(path): f"unparseable config file: {exc}"}) from exc
    return _flatten(tree)


def build_config(*layers: Dict[str, Any]) -> RunConfig:
    """Merge flat dotted layers left to right over the defaults and validate once."""
    merged: Dict[str, Any] = {}
    for layer in layers:
        merged.update(layer)
    try:
        return RunConfig.model_validate(_nest(merged))
    except ValidationError as exc:
        bad = {}
        for error in exc.errors():
            key = ".".join(str(part) for part in error["loc"]) or "<root>"
            bad[key] = error["msg"]
        raise ConfigValidationError(bad) from exc


def load_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    layers: List[Dict[str, Any]] = []
    if path is not None:
        layers.append(read_config_file(path))
    if overrides:
        layers.append(overrides)
    return build_config(*layers)


def snapshot_text(config: RunConfig) -> str:
    """All materialized values as sorted ``key = value`` lines."""
    flat = _flatten(config.model_dump(mode="json"))
    return "".join(f"{key} = {json.dumps(flat[key])}\n" for key in sorted(flat))


def write_snapshot(config: RunConfig, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(snapshot_text(config), encoding="utf-8")
    return path


def read_snapshot(path: Union[str, Path]) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise RejectedInputError(f"no config snapshot at {path}")
    return build_config(read_config_file(path))


def get_settings() -> EnvironmentSettings:
    return EnvironmentSettings()
