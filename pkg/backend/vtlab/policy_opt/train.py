"""
Engine-policy training inside a virtual environment.

Each engine episode is one customer session (the engine acts once and the session's purchase
flag is the reward), so advantages reduce to the shaped reward minus the value baseline.
Rewards are shaped by the action-norm constraint before advantages are computed.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd

from ..config import AncConfig, TrpoConfig
from ..core.logging_config import LogCategory, get_logger
from ..error_handling import DivergenceGuard, RejectedInputError
from ..market.domain import ProfileBatch
from ..market.environment import VirtualEnvironment
from ..nn.checkpoint import load_checkpoint, mlp_from_tensors, mlp_to_tensors, save_checkpoint
from ..utils.seeding import STREAM_ROLLOUT, STREAM_TRAINING, derive_seeds, make_rng, run_sharded
from .anc import anc_shape_batch
from .heads import DeterministicEnginePolicy, GaussianData, GaussianHead, GaussianPolicy
from .trpo import TrpoBatch, compute_gae, standardize, trpo_step
from .value import ValueFunction

logger = get_logger(__name__, LogCategory.TRAINING)

CURVE_COLUMNS = ["iter", "mean_return", "r2p_virtual", "kl", "mean_action_norm"]
ENGINE_STREAM_INDEX = 2


@dataclass
class EngineTrainingResult:
    policy: DeterministicEnginePolicy
    gaussian: GaussianPolicy
    value: ValueFunction
    curve: pd.DataFrame


def collect_engine_batch(env: VirtualEnvironment, policy: GaussianPolicy, count: int, seed: int,
                         threads: int = 1):
    """Sample ``count`` one-session episodes; returns (profiles, actions, rewards, page_views)."""

    def work(n, rng):
        profiles = env.sample_profiles(n, rng)
        actions = policy.act(profiles, rng)
        outcome = env.play(profiles, actions, rng)
        return profiles, actions, outcome.rewards, outcome.page_views

    shards = run_sharded(work, count, seed, STREAM_ROLLOUT, threads=threads)
    return (
        ProfileBatch.concat([s[0] for s in shards]),
        np.concatenate([s[1] for s in shards], axis=0),
        np.concatenate([s[2] for s in shards]),
        np.concatenate([s[3] for s in shards]),
    )


def train_engine_policy(
    env: VirtualEnvironment,
    cfg: TrpoConfig,
    anc: Optional[AncConfig] = None,
    iterations: Optional[int] = None,
    seed: int = 0,
    threads: int = 1,
    engine_dim: Optional[int] = None,
) -> EngineTrainingResult:
    """
    TRPO on the engine view of ``env``; ``anc`` None (or disabled) trains on raw rewards.
    Returns the deterministic mean-action policy with the learning curve.
    """
    iterations = cfg.iterations if iterations is None else iterations
    rng = make_rng(seed, STREAM_TRAINING, ENGINE_STREAM_INDEX)
    sample = env.sample_profiles(1, make_rng(seed, STREAM_TRAINING, ENGINE_STREAM_INDEX, 0))
    in_dim = sample.encode().shape[1]
    action_dim = engine_dim if engine_dim is not None else _engine_dim(env)
    policy = GaussianPolicy.create(in_dim, action_dim, rng, hidden=cfg.hidden, init_log_std=cfg.init_log_std)
    value = ValueFunction.create(in_dim, rng, hidden=cfg.hidden, lr=cfg.value_lr)
    guard = DivergenceGuard("trpo")
    rollout_seeds = derive_seeds(seed, iterations, stream=STREAM_ROLLOUT)
    rows = []

    for iteration in range(iterations):
        profiles, actions, rewards, page_views = collect_engine_batch(
            env, policy, cfg.batch_size, rollout_seeds[iteration], threads
        )
        shaped = anc_shape_batch(rewards, actions, anc)
        inputs = profiles.encode()
        values = value.predict(inputs)
        done = np.ones(len(profiles), dtype=bool)
        advantages, returns = compute_gae(shaped, values, np.zeros_like(values), done, done, cfg.gamma, cfg.lam)
        batch = TrpoBatch(GaussianData(inputs, actions), standardize(advantages), returns, inputs)
        policy, diag = trpo_step(policy, batch, cfg, value=value, rng=rng)

        mean_return = float(shaped.mean())
        r2p = float(rewards.sum()) / max(int(page_views.sum()), 1)
        norm = float(np.linalg.norm(actions, axis=1).mean())
        guard.check(iteration, mean_return=mean_return, kl=diag.kl, value_loss=diag.value_loss_after)
        rows.append({"iter": iteration, "mean_return": mean_return, "r2p_virtual": r2p,
                     "kl": diag.kl, "mean_action_norm": norm})
        logger.training_debug(
            f"return={mean_return:.4f} r2p={r2p:.4f} kl={diag.kl:.5f} norm={norm:.3f} "
            f"accepted={diag.accepted}",
            operation="train_engine_policy", iteration=iteration,
        )

    curve = pd.DataFrame(rows, columns=CURVE_COLUMNS)
    if rows:
        logger.training_info(
            f"engine policy trained for {iterations} iterations in '{env.name}' "
            f"(anc={'on' if anc is not None and anc.enabled else 'off'}): "
            f"final r2p={rows[-1]['r2p_virtual']:.4f}",
            operation="train_engine_policy",
        )
    return EngineTrainingResult(policy.deterministic(), policy, value, curve)


def _engine_dim(env: VirtualEnvironment) -> int:
    dim = getattr(env.customer, "engine_dim", None)
    if dim is None:
        raise RejectedInputError(f"cannot infer the engine action size of environment '{env.name}'")
    return int(dim)


# persistence

def engine_policy_to_tensors(policy: GaussianPolicy) -> Dict[str, np.ndarray]:
    tensors = mlp_to_tensors(policy.head.mean_net, "engine")
    tensors["engine.log_std"] = np.array(policy.head.log_std)
    return tensors


def engine_policy_from_tensors(tensors: Dict[str, np.ndarray]) -> GaussianPolicy:
    return GaussianPolicy(GaussianHead(mlp_from_tensors(tensors, "engine"), np.array(tensors["engine.log_std"])))


def save_engine_policy(policy: GaussianPolicy, path: Union[str, Path]) -> Path:
    return save_checkpoint(path, engine_policy_to_tensors(policy))


def load_engine_policy(path: Union[str, Path], producer: str = "train-rl") -> GaussianPolicy:
    return engine_policy_from_tensors(load_checkpoint(path, producer=producer))
