"""
Pipeline stages shared by the command line and the experiments: world construction, data
logging, environment fitting and policy evaluation.
"""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..baselines.bc import train_bc
from ..config import RunConfig
from ..core.logging_config import LogCategory, get_logger
from ..error_handling import RejectedInputError
from ..gansd.model import GansdModel, GansdSampler
from ..gansd.train import train_gansd
from ..market.dataset import Dataset
from ..market.domain import CustomerPolicy, CustomerSampler, EnginePolicy, ProfileBatch
from ..market.environment import VirtualEnvironment
from ..market.metrics import SessionMetrics
from ..market.policies import EmpiricalSampler
from ..mail.train import build_virtual_env, train_mail
from ..oracle.drift import drift
from ..oracle.market import OracleSampler, evaluate_in_oracle, generate_log, logging_policy
from ..oracle.params import OracleParams, default_params
from ..policy_opt.train import EngineTrainingResult, train_engine_policy
from ..utils.seeding import STREAM_CUSTOMERS, STREAM_EVALUATION, derive_seeds, run_sharded

logger = get_logger(__name__, LogCategory.BENCH)

ENV_METHODS = ("mail", "bc")


def world_params(cfg: RunConfig, drift_level: Optional[float] = None) -> OracleParams:
    """Ground-truth parameters at ``drift_level`` (the run's level by default); drift directions are fixed per world."""
    level = cfg.drift_level if drift_level is None else drift_level
    return drift(default_params(cfg.oracle), level, cfg.oracle.world_seed, cfg.oracle)


def log_data(params: OracleParams, cfg: RunConfig, seed: int, sessions: Optional[int] = None,
             time_slice: Optional[str] = None, drift_level: float = 0.0) -> Dataset:
    policy = logging_policy(params, cfg.oracle.logging_low, cfg.oracle.logging_high)
    return generate_log(params, policy, sessions or cfg.sessions, seed, threads=cfg.threads,
                        time_slice=time_slice, drift_level=drift_level)


def eval_seed(seed: int) -> int:
    """Evaluation stream of a seed; every arm evaluated under one seed shares it."""
    return derive_seeds(seed, 1, stream=STREAM_EVALUATION)[0]


def oracle_profiles(params: OracleParams, count: int, seed: int, threads: int = 1) -> ProfileBatch:
    shards = run_sharded(OracleSampler(params).sample, count, seed, STREAM_CUSTOMERS, threads=threads)
    return ProfileBatch.concat(shards)


@dataclass
class LearnedEnvironment:
    env: VirtualEnvironment
    method: str
    sampler: CustomerSampler
    customer: CustomerPolicy
    gansd: Optional[GansdModel] = None


def fit_sampler(dataset: Dataset, cfg: RunConfig, seed: int, iterations: Optional[int] = None) -> GansdModel:
    gansd_cfg = cfg.gansd if iterations is None else cfg.gansd.model_copy(update={"iterations": iterations})
    return train_gansd(dataset, gansd_cfg, seed).model


def fit_customer(dataset: Dataset, sampler: CustomerSampler, cfg: RunConfig, seed: int, method: str,
                 iterations: Optional[int] = None) -> CustomerPolicy:
    if method == "mail":
        return train_mail(dataset, sampler, cfg.mail, cfg.trpo, seed, threads=cfg.threads,
                          iterations=iterations).customer_policy
    if method == "bc":
        return train_bc(dataset, cfg.bc, seed).policy
    raise RejectedInputError(f"unknown environment method '{method}'", suggestions=list(ENV_METHODS))


def fit_environment(dataset: Dataset, cfg: RunConfig, seed: int, method: str = "mail",
                    gansd_iterations: Optional[int] = None, mail_iterations: Optional[int] = None,
                    gansd: Optional[GansdModel] = None) -> LearnedEnvironment:
    """Customer sampler plus behavior model learned from ``dataset``, assembled into an environment."""
    gansd = gansd if gansd is not None else fit_sampler(dataset, cfg, seed, gansd_iterations)
    sampler: CustomerSampler = GansdSampler(gansd)
    customer = fit_customer(dataset, sampler, cfg, seed, method, mail_iterations)
    if method == "bc" and cfg.bench.bc_sampler == "empirical":
        sampler = EmpiricalSampler.from_dataset(dataset)
    env = build_virtual_env(sampler, customer, dataset.meta.max_index, name=method)
    logger.bench_info(f"fitted {method} environment", operation="fit_environment", seed=seed)
    return LearnedEnvironment(env, method, sampler, customer, gansd)


def train_in(env: VirtualEnvironment, cfg: RunConfig, seed: int, use_anc: bool = True,
             engine_dim: Optional[int] = None) -> EngineTrainingResult:
    anc = cfg.anc.model_copy(update={"enabled": True}) if use_anc else None
    return train_engine_policy(env, cfg.trpo, anc, seed=seed, threads=cfg.threads,
                               engine_dim=engine_dim if engine_dim is not None else cfg.oracle.engine_dim)


def oracle_metrics(params: OracleParams, policy: EnginePolicy, cfg: RunConfig, seed: int,
                   sessions: Optional[int] = None) -> SessionMetrics:
    return evaluate_in_oracle(params, policy, sessions or cfg.bench.eval_sessions, seed, threads=cfg.threads)


def virtual_r2p(env: VirtualEnvironment, policy: EnginePolicy, cfg: RunConfig, seed: int,
                sessions: Optional[int] = None) -> float:
    return env.r2p(policy, sessions or cfg.bench.eval_sessions, seed, threads=cfg.threads)


def experiment_seeds(cfg: RunConfig):
    return [cfg.seed + k for k in range(cfg.bench.seeds)]


def relative_change(value: float, reference: float) -> float:
    return (value - reference) / reference if reference else float(np.nan)
