"""
Adversarial imitation of logged customer behavior.

Every iteration rolls out the joint policy, updates the discriminator on generated versus
expert pairs, rewards each generated step with -log D and takes one trust-region step on
the concatenated (customer, engine) parameters.
"""
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np
import pandas as pd
from sklearn.model_selection import train_test_split

from ..config import MailConfig, TrpoConfig
from ..core.logging_config import LogCategory, get_logger
from ..error_handling import DivergenceGuard, InsufficientDataError
from ..market.dataset import Dataset
from ..market.domain import DEFAULT_MAX_INDEX, CustomerPolicy, CustomerSampler, ProfileBatch, customer_state_dim
from ..market.environment import VirtualEnvironment
from ..nn.checkpoint import load_checkpoint, mlp_from_tensors, mlp_to_tensors, save_checkpoint
from ..nn.optim import make_optimizer
from ..policy_opt.heads import CategoricalHead, GaussianHead, GaussianPolicy
from ..policy_opt.trpo import TrpoBatch, compute_gae, standardize, trpo_step
from ..policy_opt.value import ValueFunction
from ..utils.seeding import STREAM_ROLLOUT, STREAM_TRAINING, derive_seeds, make_rng
from ..utils.stats import tv_distance
from .discriminator import (
    MailDiscriminator,
    discriminator_accuracy,
    expert_pairs,
    mail_discriminator_update,
)
from .policy import JointPolicy, MailCustomerPolicy
from .rollout import mail_rollout

logger = get_logger(__name__, LogCategory.TRAINING)

CURVE_COLUMNS = ["iter", "disc_loss", "mean_imitation_reward", "policy_kl", "disc_accuracy"]
MAIL_STREAM_INDEX = 3


@dataclass
class MailTrainingResult:
    customer_policy: MailCustomerPolicy
    engine_policy: GaussianPolicy
    discriminator: MailDiscriminator
    joint: JointPolicy
    curve: pd.DataFrame


def init_mail(request_dim: int, engine_dim: int, max_index: int, cfg: MailConfig, rng: np.random.Generator):
    joint = JointPolicy.create(request_dim, engine_dim, max_index, rng, hidden=cfg.hidden,
                               init_log_std=cfg.init_log_std)
    disc = MailDiscriminator.create(request_dim, engine_dim, max_index, rng, hidden=cfg.disc_hidden)
    return joint, disc


def train_mail(
    expert: Dataset,
    sampler: CustomerSampler,
    cfg: MailConfig,
    trpo: TrpoConfig,
    seed: int,
    threads: int = 1,
    iterations: Optional[int] = None,
) -> MailTrainingResult:
    """Returns the learned customer policy (the environment's behavior model) plus the engine head and discriminator."""
    if expert.n_records == 0:
        raise InsufficientDataError("MAIL needs a nonempty expert dataset")
    iterations = cfg.iterations if iterations is None else iterations
    meta = expert.meta
    max_index = meta.max_index
    rng = make_rng(seed, STREAM_TRAINING, MAIL_STREAM_INDEX)
    joint, disc = init_mail(meta.request_dim, meta.engine_dim, max_index, cfg, rng)
    value = ValueFunction.create(customer_state_dim(meta.request_dim, meta.engine_dim), rng,
                                 hidden=trpo.hidden, lr=trpo.value_lr)
    disc_opt = make_optimizer(disc.network.parameters(), "adam", cfg.disc_lr)

    exp_inputs, exp_choices = expert_pairs(expert, max_index)
    if exp_inputs.shape[0] >= 2:
        exp_train_x, exp_hold_x, exp_train_y, exp_hold_y = train_test_split(
            exp_inputs, exp_choices, test_size=cfg.holdout_fraction, random_state=int(rng.integers(2**31 - 1))
        )
    else:
        exp_train_x, exp_hold_x, exp_train_y, exp_hold_y = exp_inputs, exp_inputs, exp_choices, exp_choices

    guard = DivergenceGuard("mail")
    rollout_seeds = derive_seeds(seed, iterations, stream=STREAM_ROLLOUT)
    rows = []

    for iteration in range(iterations):
        traj = mail_rollout(joint, sampler, cfg.trajectories, rollout_seeds[iteration], max_index,
                            step_cap=cfg.step_cap, threads=threads)
        gen_inputs = traj.customer_inputs(joint)
        gen_choices = traj.choices
        gen_hold = rng.random(len(traj)) < cfg.holdout_fraction
        if gen_hold.all():
            gen_hold[:] = False

        disc_loss = float("nan")
        for _ in range(cfg.disc_steps):
            pick = rng.integers(0, exp_train_x.shape[0], size=min(cfg.expert_batch, exp_train_x.shape[0]))
            disc, disc_loss = mail_discriminator_update(
                disc,
                (gen_inputs[~gen_hold], gen_choices[~gen_hold]),
                (exp_train_x[pick], exp_train_y[pick]),
                disc_opt,
            )
        accuracy = (
            discriminator_accuracy(disc, (gen_inputs[gen_hold], gen_choices[gen_hold]), (exp_hold_x, exp_hold_y))
            if gen_hold.any() else float("nan")
        )

        rewards = disc.rewards(gen_inputs, gen_choices)
        values = value.predict(gen_inputs)
        ends = traj.segment_ends()
        # the next row of a trajectory is its successor state; truncated rows bootstrap from themselves
        next_values = np.append(values[1:], 0.0)
        next_values[traj.truncated] = values[traj.truncated]
        advantages, returns = compute_gae(rewards, values, next_values, traj.terminal, ends, trpo.gamma, trpo.lam)
        batch = TrpoBatch(traj.joint_data(joint), standardize(advantages), returns, gen_inputs)
        joint, diag = trpo_step(joint, batch, trpo, value=value, rng=rng)

        mean_reward = float(rewards.mean())
        guard.check(iteration, disc_loss=disc_loss, mean_imitation_reward=mean_reward, policy_kl=diag.kl)
        rows.append({"iter": iteration, "disc_loss": disc_loss, "mean_imitation_reward": mean_reward,
                     "policy_kl": diag.kl, "disc_accuracy": accuracy})
        logger.training_debug(
            f"disc_loss={disc_loss:.4f} reward={mean_reward:.4f} kl={diag.kl:.5f} acc={accuracy:.3f}",
            operation="train_mail", iteration=iteration,
        )

    curve = pd.DataFrame(rows, columns=CURVE_COLUMNS)
    if rows:
        logger.training_info(
            f"MAIL finished {iterations} iterations: disc_loss={rows[-1]['disc_loss']:.4f} "
            f"disc_accuracy={rows[-1]['disc_accuracy']:.3f}",
            operation="train_mail",
        )
    return MailTrainingResult(joint.customer_policy(), joint.engine_policy(), disc, joint, curve)


def build_virtual_env(sampler: CustomerSampler, customer_policy: CustomerPolicy,
                      max_index: int = DEFAULT_MAX_INDEX, name: str = "virtual") -> VirtualEnvironment:
    """Engine-view environment from a learned customer sampler and behavior model."""
    return VirtualEnvironment(sampler, customer_policy, max_index=max_index, name=name)


def policy_tv_distance(policy_a: CustomerPolicy, policy_b: CustomerPolicy, profiles: ProfileBatch,
                       actions: np.ndarray, pages: np.ndarray) -> Dict[str, float]:
    """Mean and max state-wise total-variation distance between two customer policies."""
    pa = policy_a.probabilities(profiles, actions, pages)
    pb = policy_b.probabilities(profiles, actions, pages)
    distances = np.array([tv_distance(a, b) for a, b in zip(pa, pb)])
    return {"mean": float(distances.mean()), "max": float(distances.max())}


# persistence

def mail_to_tensors(result: MailTrainingResult) -> Dict[str, np.ndarray]:
    joint = result.joint
    tensors = {}
    tensors.update(mlp_to_tensors(joint.customer.net, "customer"))
    tensors.update(mlp_to_tensors(joint.engine.mean_net, "engine"))
    tensors["engine.log_std"] = np.array(joint.engine.log_std)
    tensors.update(mlp_to_tensors(result.discriminator.network, "discriminator"))
    tensors["mail.max_index"] = np.array([joint.max_index], dtype=np.float64)
    return tensors


def mail_from_tensors(tensors: Dict[str, np.ndarray]) -> MailTrainingResult:
    max_index = int(tensors["mail.max_index"][0])
    joint = JointPolicy(
        GaussianHead(mlp_from_tensors(tensors, "engine"), np.array(tensors["engine.log_std"])),
        CategoricalHead(mlp_from_tensors(tensors, "customer")),
        max_index,
    )
    disc = MailDiscriminator(mlp_from_tensors(tensors, "discriminator"), max_index)
    curve = pd.DataFrame(columns=CURVE_COLUMNS)
    return MailTrainingResult(joint.customer_policy(), joint.engine_policy(), disc, joint, curve)


def save_mail(result: MailTrainingResult, path: Union[str, Path]) -> Path:
    return save_checkpoint(path, mail_to_tensors(result))


def load_mail(path: Union[str, Path]) -> MailTrainingResult:
    return mail_from_tensors(load_checkpoint(path, producer="fit-mail"))

